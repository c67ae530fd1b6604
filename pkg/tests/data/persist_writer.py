"""Child process for the durability harness: write records until killed.

Prints one `ACK cls|id|version|payload-canonical` line after each
acknowledged put, flushed, so the parent knows exactly what durability was
promised before the SIGKILL landed.
"""

import random
import sys

sys.path.insert(0, sys.argv[3])

from minif.persist import Store  # noqa: E402
from minif.values import attrs, canonical_json, attrs_to_json  # noqa: E402


def main():
    data_dir = sys.argv[1]
    seed = int(sys.argv[2])
    rng = random.Random(seed)
    store = Store(data_dir, classes=("devrec", "shot"))
    print("READY", flush=True)
    for i in range(100_000):
        cls = rng.choice(("devrec", "shot"))
        rid = f"id{rng.randrange(25):02d}"
        payload = attrs(step=i, fill="x" * rng.randrange(4, 120),
                        value=rng.random())
        version = store.put(cls, rid, payload)
        print(f"ACK {cls}|{rid}|{version}|{canonical_json(attrs_to_json(payload))}",
              flush=True)


if __name__ == "__main__":
    main()
