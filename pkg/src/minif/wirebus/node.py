"""Per-process bus endpoint: servant dispatch, invocation, pub/sub.

A handler processing a request must never perform a blocking invoke back
into the requesting process; notifications travel as one-way evt frames.
The per-servant lock plus request timeouts turn accidental callback cycles
into timeouts instead of deadlocks.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..clock import Clock, WALL
from ..errors import MinifError, RemoteError, code_of
from ..values import StatusValue, canonical_json, sv_int, sv_text, wrap
from .errors import (BusTimeout, Disconnected, DuplicateLocalName, NameNotFound,
                     NameServiceUnavailable, UnknownOp)
from .frame import Frame, new_id
from .hub import ns_endpoint_from_env
from .transport import ConnectionLost, DropOldestQueue, FrameServer, PeerConn, ServerConn

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 5000
SUSPECT_AFTER = 1     # consecutive failures
DISCONNECTED_AFTER = 3


@dataclass(frozen=True)
class ObjectRef:
    name: str
    host: str
    port: int
    incarnation: int

    @property
    def endpoint(self) -> tuple[str, int]:
        return (self.host, self.port)


@dataclass
class ConnectionState:
    endpoint: tuple[str, int]
    consecutive_failures: int = 0
    last_ok: Optional[int] = None   # epoch ms

    @property
    def state(self) -> str:
        if self.consecutive_failures >= DISCONNECTED_AFTER:
            return "disconnected"
        if self.consecutive_failures >= SUSPECT_AFTER:
            return "suspect"
        return "connected"


@dataclass
class CallContext:
    node: "BusNode"
    frame: Frame

    @property
    def key(self) -> Optional[str]:
        return self.frame.key

    @property
    def kind(self) -> str:
        return self.frame.kind


class Subscription:
    def __init__(self, node: "BusNode", sub_id: int, prefix: str):
        self.node = node
        self.sub_id = sub_id
        self.prefix = prefix
        self.cancelled = False

    def cancel(self):
        if not self.cancelled:
            self.cancelled = True
            self.node._unsubscribe(self)


class BusNode:
    """One process's connection to the bus."""

    def __init__(self, node_id: str, ns: tuple[str, int] | None = None,
                 listen_host: str = "127.0.0.1", listen_port: int = 0,
                 clock: Clock = WALL):
        self.node_id = node_id
        self.ns = ns or ns_endpoint_from_env()
        self.clock = clock
        self._servants: dict[str, Any] = {}
        self._servant_locks: dict[str, threading.Lock] = {}
        self._local_lock = threading.RLock()
        self._cache: dict[str, ObjectRef] = {}
        self._conns: dict[tuple[str, int], PeerConn] = {}
        self._conn_lock = threading.Lock()
        self._conn_states: dict[tuple[str, int], ConnectionState] = {}
        self._subs: dict[int, tuple[str, Callable]] = {}
        self._next_sub = 1
        self._event_link: PeerConn | None = None
        self._event_out: DropOldestQueue | None = None
        self._event_in: DropOldestQueue | None = None
        self.publish_drops = 0
        self._closed = False
        self.server = FrameServer(self._handle_incoming, host=listen_host, port=listen_port)

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server.endpoint

    # -- servant side ----------------------------------------------------

    def register_object(self, name: str, servant) -> ObjectRef:
        with self._local_lock:
            if name in self._servants:
                raise DuplicateLocalName(name)
            self._servants[name] = servant
            self._servant_locks[name] = threading.Lock()
        inc = self._ns_request("register", {
            "name": sv_text(name),
            "host": sv_text(self.endpoint[0]),
            "port": sv_int(self.endpoint[1]),
        })["incarnation"].value
        return ObjectRef(name, self.endpoint[0], self.endpoint[1], inc)

    def register_many(self, entries: list[tuple[str, Any]]) -> list[ObjectRef]:
        with self._local_lock:
            for name, _ in entries:
                if name in self._servants:
                    raise DuplicateLocalName(name)
            for name, servant in entries:
                self._servants[name] = servant
                self._servant_locks[name] = threading.Lock()
        host, port = self.endpoint
        payload = canonical_json([[name, host, port] for name, _ in entries])
        incs = json.loads(self._ns_request(
            "register_many", {"entries": sv_text(payload)})["incarnations"].value)
        return [ObjectRef(name, host, port, inc)
                for (name, _), inc in zip(entries, incs)]

    def _handle_incoming(self, f: Frame, conn: ServerConn):
        if f.kind not in ("req", "evt", "hb"):
            return
        with self._local_lock:
            servant = self._servants.get(f.target)
            lock = self._servant_locks.get(f.target)
        if servant is None:
            if f.kind == "req":
                conn.send(f.error("NameNotFound", f"no local servant {f.target}"))
            return
        threading.Thread(target=self._dispatch, args=(servant, lock, f, conn),
                         name=f"dispatch-{f.target}.{f.op}", daemon=True).start()

    def _dispatch(self, servant, lock: threading.Lock, f: Frame, conn: ServerConn):
        try:
            with lock:
                result = servant.handle(f.op, f.args, CallContext(self, f))
            if f.kind == "req":
                conn.send(f.reply(result or {}))
        except ConnectionLost:
            pass
        except MinifError as e:
            if f.kind == "req":
                try:
                    conn.send(f.error(code_of(e), e.detail))
                except ConnectionLost:
                    pass
        except Exception as e:
            log.exception("servant %s op %s failed", f.target, f.op)
            if f.kind == "req":
                try:
                    conn.send(f.error("Error", repr(e)))
                except ConnectionLost:
                    pass

    # -- client side -----------------------------------------------------

    def _ns_request(self, op: str, args: dict[str, StatusValue]) -> dict[str, StatusValue]:
        try:
            conn = self._get_conn(self.ns)
            reply = conn.request(Frame(kind="req", target="svc.ns", op=op, args=args),
                                 DEFAULT_TIMEOUT_MS)
        except (ConnectionLost, BusTimeout) as e:
            raise NameServiceUnavailable(str(e)) from None
        if reply.kind == "err":
            code = reply.args["code"].value
            raise (NameNotFound(reply.args["detail"].value) if code == "NameNotFound"
                   else RemoteError(code, reply.args["detail"].value))
        return reply.args

    def resolve(self, name: str) -> ObjectRef:
        with self._local_lock:
            ref = self._cache.get(name)
        if ref is not None:
            return ref
        a = self._ns_request("resolve", {"name": sv_text(name)})
        ref = ObjectRef(name, a["host"].value, a["port"].value, a["incarnation"].value)
        with self._local_lock:
            self._cache[name] = ref
        return ref

    def name_exists(self, name: str) -> bool:
        return self._ns_request("exists", {"name": sv_text(name)})["exists"].value

    def list_names(self, prefix: str = "") -> list[str]:
        return json.loads(self._ns_request("list", {"prefix": sv_text(prefix)})["names"].value)

    def _get_conn(self, endpoint: tuple[str, int]) -> PeerConn:
        with self._conn_lock:
            conn = self._conns.get(endpoint)
            if conn is not None and not conn._closed:
                return conn
        conn = PeerConn(endpoint[0], endpoint[1])
        with self._conn_lock:
            self._conns[endpoint] = conn
        return conn

    def _mark(self, endpoint: tuple[str, int], ok: bool):
        with self._conn_lock:
            st = self._conn_states.get(endpoint)
            if st is None:
                st = self._conn_states[endpoint] = ConnectionState(endpoint)
            if ok:
                st.consecutive_failures = 0
                st.last_ok = self.clock.now_ms()
            else:
                st.consecutive_failures += 1

    def connection_report(self, endpoint: tuple[str, int]) -> ConnectionState:
        from .errors import UnknownEndpoint
        with self._conn_lock:
            st = self._conn_states.get(tuple(endpoint))
        if st is None:
            raise UnknownEndpoint(str(endpoint))
        return st

    def invoke(self, name: str, op: str, args: dict | None = None, key: str | None = None,
               timeout_ms: int = DEFAULT_TIMEOUT_MS) -> dict[str, StatusValue]:
        """Request/reply to a named object. One re-resolve + retry on
        connection failure; idempotence is the caller's concern."""
        if timeout_ms <= 0:
            raise MinifError("timeout_ms must be > 0")
        sent_args = {k: wrap(v) for k, v in (args or {}).items()}
        last_err: Exception | None = None
        for attempt in (0, 1):
            ref = self.resolve(name)
            f = Frame(kind="req", target=name, op=op, args=sent_args, key=key)
            try:
                conn = self._get_conn(ref.endpoint)
                reply = conn.request(f, timeout_ms)
            except ConnectionLost as e:
                self._mark(ref.endpoint, ok=False)
                with self._local_lock:
                    self._cache.pop(name, None)
                last_err = e
                continue
            except BusTimeout:
                self._mark(ref.endpoint, ok=False)
                with self._local_lock:
                    self._cache.pop(name, None)
                raise
            self._mark(ref.endpoint, ok=True)
            if reply.kind == "err":
                raise RemoteError(reply.args["code"].value, reply.args["detail"].value)
            return reply.args
        raise Disconnected(f"{name}: {last_err}")

    def send_oneway(self, name: str, op: str, args: dict | None = None,
                    kind: str = "hb") -> None:
        sent_args = {k: wrap(v) for k, v in (args or {}).items()}
        for attempt in (0, 1):
            ref = self.resolve(name)
            try:
                self._get_conn(ref.endpoint).send(
                    Frame(kind=kind, target=name, op=op, args=sent_args))
                return
            except ConnectionLost as e:
                self._mark(ref.endpoint, ok=False)
                with self._local_lock:
                    self._cache.pop(name, None)
                if attempt:
                    raise Disconnected(f"{name}: {e}") from None

    # -- pub/sub ---------------------------------------------------------

    def _ensure_event_link(self) -> PeerConn:
        with self._conn_lock:
            if self._event_link is not None and not self._event_link._closed:
                return self._event_link
            self._event_in = DropOldestQueue(8192)
            self._event_out = DropOldestQueue(8192)
            link = PeerConn(self.ns[0], self.ns[1], on_event=self._event_in.put)
            self._event_link = link
        threading.Thread(target=self._pump_out, args=(link, self._event_out),
                         name=f"{self.node_id}-evt-out", daemon=True).start()
        threading.Thread(target=self._pump_in, args=(self._event_in,),
                         name=f"{self.node_id}-evt-in", daemon=True).start()
        return link

    def _pump_out(self, link: PeerConn, q: DropOldestQueue):
        while True:
            got = q.get()
            if got is None:
                return
            frame, dropped = got
            if dropped:
                self.publish_drops += dropped
            try:
                link.send(frame)
            except ConnectionLost:
                return

    def _pump_in(self, q: DropOldestQueue):
        while True:
            got = q.get()
            if got is None:
                return
            frame, _ = got
            sub = frame.args.get("_sub")
            if sub is None:
                continue
            with self._local_lock:
                entry = self._subs.get(sub.value)
            if entry is None:
                continue
            _, sink = entry
            args = dict(frame.args)
            args["_ts"] = sv_text(frame.ts)   # frame-level publish timestamp
            try:
                sink(frame.target, args)
            except Exception:
                log.exception("subscriber sink failed for %s", frame.target)

    def publish(self, topic: str, payload: dict, retain: bool = False) -> None:
        """Fire-and-forget event publication; never blocks the publisher."""
        args = {k: wrap(v) for k, v in payload.items()}
        if retain:
            args["_retain"] = StatusValue("bool", True)
        try:
            self._ensure_event_link()
        except ConnectionLost:
            self.publish_drops += 1
            return
        self._event_out.put(Frame(kind="evt", target=topic, op="publish", args=args,
                                  ts=self.clock.now_ts()))

    def subscribe(self, prefix: str, sink: Callable[[str, dict], None]) -> Subscription:
        """`sink(topic, args)` is called in arrival order; args may carry
        _dropped (hub queue overflow) and _retained (snapshot replay)."""
        if not prefix:
            raise MinifError("empty topic prefix")
        link = self._ensure_event_link()
        # sink registered before the hub hears about the id: retained replay
        # can land ahead of the subscribe reply
        with self._local_lock:
            sub_id = self._next_sub
            self._next_sub += 1
            self._subs[sub_id] = (prefix, sink)
        try:
            reply = link.request(Frame(kind="req", target="svc.ns", op="subscribe",
                                       args={"prefix": sv_text(prefix),
                                             "sub_id": sv_int(sub_id)}), DEFAULT_TIMEOUT_MS)
        except Exception:
            with self._local_lock:
                self._subs.pop(sub_id, None)
            raise
        if reply.kind == "err":
            with self._local_lock:
                self._subs.pop(sub_id, None)
            raise RemoteError(reply.args["code"].value, reply.args["detail"].value)
        return Subscription(self, sub_id, prefix)

    def _unsubscribe(self, sub: Subscription):
        with self._local_lock:
            self._subs.pop(sub.sub_id, None)
        link = self._event_link
        if link is not None and not link._closed:
            try:
                link.request(Frame(kind="req", target="svc.ns", op="unsubscribe",
                                   args={"sub_id": sv_int(sub.sub_id)}), DEFAULT_TIMEOUT_MS)
            except (ConnectionLost, BusTimeout):
                pass

    def close(self):
        if self._closed:
            return
        self._closed = True
        self.server.close()
        with self._conn_lock:
            conns = list(self._conns.values())
            self._conns.clear()
            link = self._event_link
        for c in conns:
            c.close()
        if link is not None:
            link.close()
        if self._event_in is not None:
            self._event_in.close()
        if self._event_out is not None:
            self._event_out.close()


class OpServant:
    """Servant base mapping bus op names to op_<name> methods."""

    def handle(self, op: str, args: dict[str, StatusValue], ctx: CallContext):
        m = getattr(self, "op_" + op, None)
        if m is None:
            raise UnknownOp(f"{type(self).__name__}.{op}")
        return m(args, ctx)


class QueueSink:
    """Collects (topic, args) pairs; handy in tests and mirrors."""

    def __init__(self):
        self.items: list[tuple[str, dict]] = []
        self._cond = threading.Condition()

    def __call__(self, topic: str, args: dict):
        with self._cond:
            self.items.append((topic, args))
            self._cond.notify_all()

    def wait_for(self, n: int, timeout: float = 5.0) -> list[tuple[str, dict]]:
        deadline = WALL.now_ms() + timeout * 1000
        with self._cond:
            while len(self.items) < n:
                remaining = (deadline - WALL.now_ms()) / 1000.0
                if remaining <= 0 or not self._cond.wait(remaining):
                    break
            return list(self.items)
