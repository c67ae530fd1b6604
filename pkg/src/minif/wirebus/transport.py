"""Framed TCP plumbing shared by the hub and bus nodes.

PeerConn multiplexes concurrent requests over one socket (replies matched by
frame id); FrameServer accepts connections and feeds inbound frames to a
handler. All threads are daemons; close() is idempotent.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
from collections import deque
from typing import Callable, Optional

from ..errors import MinifError
from .errors import BusTimeout
from .frame import Frame, decode_body, encode_frame, MAX_BODY

log = logging.getLogger(__name__)


class ConnectionLost(MinifError):
    pass


def _read_exactly(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionLost("peer closed")
        buf += chunk
    return buf


def recv_frame(sock: socket.socket) -> Frame:
    header = _read_exactly(sock, 4)
    (n,) = struct.unpack(">I", header)
    if n > MAX_BODY:
        raise ConnectionLost(f"oversized frame ({n} bytes)")
    return decode_body(_read_exactly(sock, n))


class _Waiter:
    __slots__ = ("event", "reply")

    def __init__(self):
        self.event = threading.Event()
        self.reply: Optional[Frame] = None


class PeerConn:
    """Outbound connection with a reader thread routing replies by id."""

    def __init__(self, host: str, port: int, on_event: Callable[[Frame], None] | None = None,
                 connect_timeout: float = 3.0):
        self.endpoint = (host, port)
        self.on_event = on_event
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except OSError as e:
            raise ConnectionLost(f"connect {host}:{port}: {e}") from None
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self._waiters: dict[str, _Waiter] = {}
        self._waiters_lock = threading.Lock()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop,
                                        name=f"peer-read-{host}:{port}", daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            while True:
                f = recv_frame(self._sock)
                if f.kind in ("rep", "err"):
                    with self._waiters_lock:
                        w = self._waiters.pop(f.id, None)
                    if w is not None:
                        w.reply = f
                        w.event.set()
                elif f.kind == "evt" and self.on_event is not None:
                    try:
                        self.on_event(f)
                    except Exception:
                        log.exception("event sink failed")
        except (ConnectionLost, OSError):
            pass
        except Exception:
            log.exception("reader loop died")
        finally:
            self._fail_all()

    def _fail_all(self):
        self._closed = True
        with self._waiters_lock:
            waiters, self._waiters = self._waiters, {}
        for w in waiters.values():
            w.event.set()

    def send(self, f: Frame) -> None:
        data = encode_frame(f)
        try:
            with self._send_lock:
                self._sock.sendall(data)
        except OSError as e:
            self.close()
            raise ConnectionLost(str(e)) from None

    def request(self, f: Frame, timeout_ms: int) -> Frame:
        if self._closed:
            raise ConnectionLost("connection closed")
        w = _Waiter()
        with self._waiters_lock:
            self._waiters[f.id] = w
        try:
            self.send(f)
        except ConnectionLost:
            with self._waiters_lock:
                self._waiters.pop(f.id, None)
            raise
        if not w.event.wait(timeout_ms / 1000.0):
            with self._waiters_lock:
                self._waiters.pop(f.id, None)
            raise BusTimeout(f"{f.target}.{f.op} after {timeout_ms} ms")
        if w.reply is None:
            raise ConnectionLost("connection lost while waiting for reply")
        return w.reply

    def close(self):
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class ServerConn:
    """One accepted connection on the server side."""

    def __init__(self, sock: socket.socket, peer):
        self.sock = sock
        self.peer = peer
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._send_lock = threading.Lock()
        self.closed = False

    def send(self, f: Frame) -> None:
        data = encode_frame(f)
        try:
            with self._send_lock:
                self.sock.sendall(data)
        except OSError as e:
            self.close()
            raise ConnectionLost(str(e)) from None

    def close(self):
        self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class FrameServer:
    """Accept loop + per-connection reader threads."""

    def __init__(self, handler: Callable[[Frame, ServerConn], None],
                 host: str = "127.0.0.1", port: int = 0,
                 on_conn_closed: Callable[[ServerConn], None] | None = None):
        self.handler = handler
        self.on_conn_closed = on_conn_closed
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(128)
        self.host, self.port = self._sock.getsockname()
        self._closed = False
        self._conns: set[ServerConn] = set()
        self._lock = threading.Lock()
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               name=f"accept-{self.port}", daemon=True)
        self._accept_thread.start()

    @property
    def endpoint(self) -> tuple[str, int]:
        return (self.host, self.port)

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, peer = self._sock.accept()
            except OSError:
                return
            if self._closed:
                sock.close()
                return
            conn = ServerConn(sock, peer)
            with self._lock:
                self._conns.add(conn)
            threading.Thread(target=self._conn_loop, args=(conn,),
                             name=f"serve-{peer}", daemon=True).start()

    def _conn_loop(self, conn: ServerConn):
        try:
            while True:
                f = recv_frame(conn.sock)
                try:
                    self.handler(f, conn)
                except Exception:
                    log.exception("frame handler failed for %s.%s", f.target, f.op)
        except (ConnectionLost, OSError):
            pass
        except MinifError as e:
            log.warning("dropping connection %s: %s", conn.peer, e)
        finally:
            conn.close()
            with self._lock:
                self._conns.discard(conn)
            if self.on_conn_closed is not None:
                self.on_conn_closed(conn)

    def close(self):
        self._closed = True
        try:
            # a plain close does not wake a thread blocked in accept();
            # shutdown does, and makes the kernel stop taking handshakes
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns)
        for c in conns:
            c.close()


class DropOldestQueue:
    """Bounded FIFO that drops the oldest entry when full and counts drops."""

    def __init__(self, capacity: int = 1024):
        self.capacity = capacity
        self._items: deque = deque()
        self._dropped = 0
        self._cond = threading.Condition()
        self._closed = False

    def put(self, item) -> None:
        with self._cond:
            if len(self._items) >= self.capacity:
                self._items.popleft()
                self._dropped += 1
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: float | None = None):
        """Returns (item, dropped_since_last_get) or None on close/timeout."""
        with self._cond:
            while not self._items and not self._closed:
                if not self._cond.wait(timeout):
                    return None
            if not self._items:
                return None
            item = self._items.popleft()
            dropped, self._dropped = self._dropped, 0
            return item, dropped

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self):
        with self._cond:
            return len(self._items)
