"""Test-side oracles, independent of the implementations they check."""

from __future__ import annotations


def deadband_replay(samples, deadband, max_interval_ms, tag="real"):
    """Recompute publish/suppress decisions from the rule text: publish on
    first sample; on |value - last_published| >= deadband (numeric) or any
    change (discrete); or when max_interval elapsed since last publication.
    `samples` is [(ts_ms, value)]. Returns [(index, reason)]."""
    decisions = []
    last_pub = None
    last_pub_ts = None
    discrete = tag in ("bool", "text", "enum")
    for i, (ts, value) in enumerate(samples):
        if last_pub is None:
            reason = "initial"
        elif (value != last_pub) if (discrete or deadband == 0) else (
                abs(value - last_pub) >= deadband):
            reason = "delta"
        elif ts - last_pub_ts >= max_interval_ms:
            reason = "heartbeat"
        else:
            continue
        decisions.append((i, reason))
        last_pub = value
        last_pub_ts = ts
    return decisions


def check_reservation_audit(audit_log):
    """Replay a reservation audit trail (no leases); the service applies
    ops in total order, so log order is a linearization. A taxon granted
    while already held, or a validate verdict that disagrees with the
    replayed state, is a mutual-exclusion violation. Returns op counts."""
    import json
    holders: dict[str, str] = {}      # taxon -> holder
    key_of: dict[str, str] = {}       # taxon -> key
    stats = {"grants": 0, "conflicts": 0, "releases": 0, "validates": 0}
    for rec in audit_log:
        op, outcome = rec["op"], rec["outcome"]
        if op == "reserve":
            if outcome == "ok":
                assert rec["taxon"] not in holders, f"double grant on {rec['taxon']}"
                holders[rec["taxon"]] = rec["holder"]
                key_of[rec["taxon"]] = rec["key"]
                stats["grants"] += 1
            else:
                assert rec["taxon"] in holders, "conflict reported on a free taxon"
                stats["conflicts"] += 1
        elif op == "reserve_group":
            if outcome == "ok":
                for t in json.loads(rec["taxons"]):
                    assert t not in holders, f"group double grant on {t}"
                    holders[t] = rec["holder"]
                    key_of[t] = rec["key"]
                stats["grants"] += 1
            else:
                held = json.loads(rec["held"])
                assert all(t in holders for t in held), "phantom group conflict"
                stats["conflicts"] += 1
        elif op == "release" and outcome == "ok":
            assert holders.pop(rec["taxon"], None) is not None, "release of free taxon"
            key_of.pop(rec["taxon"], None)
            stats["releases"] += 1
        elif op == "break" and outcome == "ok":
            assert holders.pop(rec["taxon"], None) is not None
            key_of.pop(rec["taxon"], None)
        elif op == "validate":
            taxon, key = rec["taxon"], rec["key"]
            expected = taxon in holders and key_of.get(taxon) == key
            assert (rec["outcome"] == "valid") == expected, (
                f"validate({taxon}) said {rec['outcome']}, replay says {expected}")
            stats["validates"] += 1
    return stats


def fold_updates(updates):
    """channel -> last update, folded in delivery order (snapshot oracle)."""
    latest = {}
    for u in updates:
        latest[u.channel] = u
    return latest


class LocalInvoker:
    """Bus-shaped invoke for in-process servants, with real timeouts."""

    def __init__(self):
        self.endpoints = {}
        self.calls = []

    def register(self, endpoint, servant):
        self.endpoints[endpoint] = servant

    def __call__(self, endpoint, op, args, timeout_ms=2000, key=None):
        import threading

        from minif.errors import MinifError, RemoteError, code_of
        from minif.values import wrap
        from minif.wirebus.errors import BusTimeout, Disconnected

        self.calls.append((endpoint, op))
        servant = self.endpoints.get(endpoint)
        if servant is None:
            raise Disconnected(str(endpoint))
        wrapped = {k: wrap(v) for k, v in (args or {}).items()}
        result = {}

        def run():
            try:
                result["out"] = servant.handle(op, wrapped, None)
            except MinifError as e:
                result["err"] = e

        t = threading.Thread(target=run, daemon=True)
        t.start()
        t.join(timeout_ms / 1000.0)
        if t.is_alive():
            raise BusTimeout(f"{endpoint}.{op} after {timeout_ms} ms")
        if "err" in result:
            e = result["err"]
            raise RemoteError(code_of(e), e.detail)
        return result.get("out") or {}
