"""The well-known bus hub: name service plus event router.

Clients hold names; the hub maps each name to its current endpoint and a
monotonically increasing incarnation number. The hub also fans published
events out to prefix subscribers through bounded per-subscriber queues
(drop-oldest, with a drop count piggybacked on the next delivered event)
so a stalled subscriber can never slow a publisher down. The last event of
each topic published with the retain flag is kept and replayed to new
subscribers.
"""

from __future__ import annotations

import json
import logging
import os
import threading

from ..errors import MinifError, code_of
from ..values import StatusValue, sv_int, sv_text, canonical_json
from .errors import NameNotFound, UnknownOp
from .frame import Frame
from .transport import ConnectionLost, DropOldestQueue, FrameServer, ServerConn

log = logging.getLogger(__name__)

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 4720
QUEUE_CAPACITY = 1024


def ns_endpoint_from_env() -> tuple[str, int]:
    host = os.environ.get("ICCS_NS_HOST", DEFAULT_HOST)
    port = int(os.environ.get("ICCS_NS_PORT", str(DEFAULT_PORT)))
    return host, port


class _SubscriberLink:
    """Outbound event pipe to one subscriber connection."""

    def __init__(self, conn: ServerConn):
        self.conn = conn
        self.queue = DropOldestQueue(QUEUE_CAPACITY)
        self.thread = threading.Thread(target=self._drain, daemon=True,
                                       name=f"hub-out-{conn.peer}")
        self.thread.start()

    def _drain(self):
        while True:
            got = self.queue.get()
            if got is None:
                return
            frame, dropped = got
            if dropped:
                frame.args = dict(frame.args)
                frame.args["_dropped"] = sv_int(dropped)
            try:
                self.conn.send(frame)
            except ConnectionLost:
                self.queue.close()
                return

    def close(self):
        self.queue.close()


class Hub:
    """Name registry and event router; one per facility."""

    def __init__(self, host: str = DEFAULT_HOST, port: int = DEFAULT_PORT):
        self._lock = threading.RLock()
        self._names: dict[str, tuple[str, int, int]] = {}   # name -> (host, port, incarnation)
        self._incarnations: dict[str, int] = {}
        # subscriber ids are chosen by the client and scoped to its connection
        self._subs: dict[ServerConn, dict[int, str]] = {}   # conn -> {sub_id: prefix}
        self._links: dict[ServerConn, _SubscriberLink] = {}
        self._retained: dict[str, dict[str, StatusValue]] = {}
        self._published = 0
        self.server = FrameServer(self._handle, host=host, port=port,
                                  on_conn_closed=self._conn_closed)

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server.endpoint

    # -- frame handling -------------------------------------------------

    def _handle(self, f: Frame, conn: ServerConn):
        if f.kind == "evt":
            self._route_event(f)
            return
        if f.kind != "req":
            return
        try:
            result = self._dispatch(f, conn)
            conn.send(f.reply(result))
        except MinifError as e:
            conn.send(f.error(code_of(e), e.detail))
        except ConnectionLost:
            raise
        except Exception as e:  # keep the hub alive no matter what
            log.exception("hub op %s failed", f.op)
            conn.send(f.error("Error", repr(e)))

    def _dispatch(self, f: Frame, conn: ServerConn) -> dict[str, StatusValue]:
        op, a = f.op, f.args
        if op == "register":
            inc = self.register(a["name"].value, a["host"].value, a["port"].value)
            return {"incarnation": sv_int(inc)}
        if op == "register_many":
            entries = json.loads(a["entries"].value)
            incs = [self.register(n, h, p) for n, h, p in entries]
            return {"incarnations": sv_text(canonical_json(incs))}
        if op == "resolve":
            host, port, inc = self.resolve(a["name"].value)
            return {"host": sv_text(host), "port": sv_int(port), "incarnation": sv_int(inc)}
        if op == "exists":
            with self._lock:
                found = a["name"].value in self._names
            return {"exists": StatusValue("bool", found)}
        if op == "list":
            prefix = a.get("prefix", sv_text("")).value
            with self._lock:
                names = sorted(n for n in self._names if n.startswith(prefix))
            return {"names": sv_text(canonical_json(names))}
        if op == "subscribe":
            self._subscribe(a["prefix"].value, a["sub_id"].value, conn)
            return {"sub_id": a["sub_id"]}
        if op == "unsubscribe":
            self._unsubscribe(a["sub_id"].value, conn)
            return {}
        if op == "stats":
            with self._lock:
                nsubs = sum(len(s) for s in self._subs.values())
                return {"names": sv_int(len(self._names)),
                        "subscriptions": sv_int(nsubs),
                        "published": sv_int(self._published),
                        "retained": sv_int(len(self._retained))}
        if op == "ping":
            return {}
        raise UnknownOp(op)

    # -- name service ----------------------------------------------------

    def register(self, name: str, host: str, port: int) -> int:
        with self._lock:
            inc = self._incarnations.get(name, 0) + 1
            self._incarnations[name] = inc
            self._names[name] = (host, port, inc)
            return inc

    def resolve(self, name: str) -> tuple[str, int, int]:
        with self._lock:
            entry = self._names.get(name)
        if entry is None:
            raise NameNotFound(name)
        return entry

    # -- event routing ---------------------------------------------------

    def _route_event(self, f: Frame):
        topic = f.target
        payload = dict(f.args)
        retain = payload.pop("_retain", None)
        with self._lock:
            self._published += 1
            if retain is not None and retain.value:
                self._retained[topic] = payload
            targets = [(sid, self._links[conn])
                       for conn, subs in self._subs.items()
                       for sid, prefix in subs.items() if topic.startswith(prefix)]
        for sid, link in targets:
            args = dict(payload)
            args["_sub"] = sv_int(sid)
            link.queue.put(Frame(kind="evt", target=topic, op="event", args=args, ts=f.ts))

    def _subscribe(self, prefix: str, sub_id: int, conn: ServerConn) -> None:
        if not prefix:
            raise MinifError("empty topic prefix")
        with self._lock:
            link = self._links.get(conn)
            if link is None:
                link = _SubscriberLink(conn)
                self._links[conn] = link
            self._subs.setdefault(conn, {})[sub_id] = prefix
            matches = sorted(t for t in self._retained if t.startswith(prefix))
            for topic in matches:
                args = dict(self._retained[topic])
                args["_sub"] = sv_int(sub_id)
                args["_retained"] = StatusValue("bool", True)
                link.queue.put(Frame(kind="evt", target=topic, op="event", args=args))

    def _unsubscribe(self, sub_id: int, conn: ServerConn):
        with self._lock:
            self._subs.get(conn, {}).pop(sub_id, None)

    def _conn_closed(self, conn: ServerConn):
        with self._lock:
            link = self._links.pop(conn, None)
            self._subs.pop(conn, None)
        if link is not None:
            link.close()

    def close(self):
        self.server.close()
        with self._lock:
            links = list(self._links.values())
        for l in links:
            l.close()


def main(argv=None):
    """Run a hub process until killed (the `minif ns` entry point)."""
    import argparse
    p = argparse.ArgumentParser(prog="minif ns")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    args = p.parse_args(argv)
    env_host, env_port = ns_endpoint_from_env()
    hub = Hub(args.host or env_host, args.port if args.port is not None else env_port)
    log.info("hub listening on %s:%d", *hub.endpoint)
    threading.Event().wait()
