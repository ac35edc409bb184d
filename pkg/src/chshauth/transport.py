"""Length-prefixed JSON framing over TCP, plus an in-process loopback.

Frame layout: 4-byte big-endian unsigned payload length, then the UTF-8
JSON payload of exactly one message. Payloads above 1 MiB are refused in
both directions.
"""
from __future__ import annotations

import socket
import socketserver
import struct
import threading
from collections import deque

from .messages import DecodeError, Message, decode, encode

HEADER = struct.Struct(">I")
MAX_PAYLOAD = 1 << 20
DEFAULT_PORT = 7117
DEFAULT_DISTRIBUTOR_PORT = 7118
DEFAULT_TIMEOUT = 30.0


class TransportError(Exception):
    pass


class ChannelClosed(TransportError):
    pass


class OversizeFrame(TransportError):
    pass


class TransportTimeout(TransportError):
    pass


class FrameDecodeError(TransportError, DecodeError):
    pass


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise OversizeFrame(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(len(payload)) + payload


def decode_frame(data: bytes) -> tuple[bytes, bytes]:
    """Split one frame off ``data``; returns (payload, rest)."""
    if len(data) < HEADER.size:
        raise FrameDecodeError("truncated frame header")
    (n,) = HEADER.unpack_from(data)
    if n > MAX_PAYLOAD:
        raise OversizeFrame(f"frame announces {n} bytes, limit is {MAX_PAYLOAD}")
    end = HEADER.size + n
    if len(data) < end:
        raise FrameDecodeError(f"truncated frame: expected {n} payload bytes, got {len(data) - HEADER.size}")
    return data[HEADER.size:end], data[end:]


def frame_message(msg: Message) -> bytes:
    return encode_frame(encode(msg))


class LoopbackEndpoint:
    """One side of an in-process duplex channel with per-session FIFO queues.

    With ``wire=True`` (the default) every message is framed, JSON-encoded
    and decoded on delivery, exactly as on TCP. ``wire=False`` passes the
    message objects through untouched, which the bulk simulator uses.
    """

    def __init__(self, name: str, wire: bool = True):
        self.name = name
        self.wire = wire
        self.peer: LoopbackEndpoint | None = None
        self.closed = False
        self._inbox: dict[str, deque] = {}
        self._cond = threading.Condition()

    def _queue(self, session_id: str) -> deque:
        q = self._inbox.get(session_id)
        if q is None:
            q = self._inbox[session_id] = deque()
        return q

    def send(self, session_id: str, msg: Message) -> None:
        if self.closed or self.peer is None or self.peer.closed:
            raise ChannelClosed(f"{self.name}: channel closed")
        item = frame_message(msg) if self.wire else msg
        peer = self.peer
        with peer._cond:
            peer._queue(session_id).append(item)
            peer._cond.notify_all()

    def _dead(self) -> bool:
        return self.closed or (self.peer is not None and self.peer.closed)

    def pending(self, session_id: str) -> int:
        return len(self._queue(session_id))

    def recv(self, session_id: str, timeout: float | None = 0.0) -> Message:
        with self._cond:
            q = self._queue(session_id)
            if not q:
                if self._dead():
                    raise ChannelClosed(f"{self.name}: channel closed")
                if timeout:
                    self._cond.wait_for(lambda: q or self._dead(), timeout)
                if not q and self._dead():
                    raise ChannelClosed(f"{self.name}: channel closed")
                if not q:
                    raise TransportTimeout(f"{self.name}: no message for session {session_id!r}")
            item = q.popleft()
        if self.wire:
            payload, rest = decode_frame(item)
            if rest:
                raise FrameDecodeError("trailing bytes after frame")
            return decode(payload)
        return item

    def inject_raw(self, session_id: str, data: bytes) -> None:
        """Deliver raw bytes to this endpoint as if they came off the wire."""
        with self._cond:
            self._queue(session_id).append(data)
            self._cond.notify_all()

    def close(self) -> None:
        self.closed = True
        for ep in (self, self.peer):
            if ep is not None:
                with ep._cond:
                    ep._cond.notify_all()


def loopback_pair(seed: int = 0, wire: bool = True) -> tuple[LoopbackEndpoint, LoopbackEndpoint]:
    """Connected in-process endpoints with deterministic FIFO delivery.

    Delivery order is fully determined by the order of ``send`` calls, so
    ``seed`` only names the pair.
    """
    a = LoopbackEndpoint(f"loop{seed}-a", wire)
    b = LoopbackEndpoint(f"loop{seed}-b", wire)
    a.peer, b.peer = b, a
    return a, b


class TcpEndpoint:
    """Framed messages over one TCP connection (one session per connection)."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.closed = False
        self._wlock = threading.Lock()
        self._rlock = threading.Lock()
        self._buf = b""

    def send(self, session_id: str | None, msg: Message) -> None:
        frame = frame_message(msg)
        if self.closed:
            raise ChannelClosed("tcp channel closed")
        with self._wlock:
            try:
                self.sock.sendall(frame)
            except OSError as exc:
                self.closed = True
                raise ChannelClosed(f"send failed: {exc}") from None

    def _read_exact(self, n: int, timeout: float | None) -> bytes:
        self.sock.settimeout(timeout)
        while len(self._buf) < n:
            try:
                chunk = self.sock.recv(max(65536, n - len(self._buf)))
            except socket.timeout:
                raise TransportTimeout("no message before timeout") from None
            except OSError as exc:
                self.closed = True
                raise ChannelClosed(f"recv failed: {exc}") from None
            if not chunk:
                self.closed = True
                if self._buf:
                    raise FrameDecodeError("connection closed inside a frame")
                raise ChannelClosed("peer closed the connection")
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def recv(self, session_id: str | None = None, timeout: float | None = DEFAULT_TIMEOUT) -> Message:
        if self.closed:
            raise ChannelClosed("tcp channel closed")
        with self._rlock:
            (n,) = HEADER.unpack(self._read_exact(HEADER.size, timeout))
            if n > MAX_PAYLOAD:
                self.close()
                raise OversizeFrame(f"frame announces {n} bytes, limit is {MAX_PAYLOAD}")
            return decode(self._read_exact(n, timeout))

    def request(self, msg: Message, timeout: float | None = DEFAULT_TIMEOUT) -> Message:
        """Send and wait for the single reply (request/response peers only)."""
        self.send(None, msg)
        return self.recv(None, timeout)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()


def connect(host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> TcpEndpoint:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return TcpEndpoint(sock)


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_server(host: str, port: int, handler) -> socketserver.ThreadingTCPServer:
    """Listener calling ``handler(endpoint)`` on a thread per connection."""

    class _Handler(socketserver.BaseRequestHandler):
        def handle(self):
            self.request.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            ep = TcpEndpoint(self.request)
            try:
                handler(ep)
            finally:
                ep.close()

    return _Server((host, port), _Handler)
