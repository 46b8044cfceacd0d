"""Message-passing transport for the rank-sharded simulator.

Every cross-rank effect goes through a :class:`Communicator`.  Two world
implementations back it:

* :class:`LocalWorld` runs all ranks inside one process, one thread per rank.
  In ``"scheduled"`` mode only one rank thread executes at a time and control
  is handed over deterministically whenever a rank blocks on a receive, so a
  run is exactly reproducible.  ``"threaded"`` mode lets the rank threads run
  freely.
* :func:`run_spmd` with ``transport="socket"`` forks one process per rank and
  connects them over local TCP sockets.  Frames are ``(tag: u32, length: u64,
  payload)`` with the payload being little-endian interleaved re/im float64.

Payloads are always complex128 blocks; integers and reals ride along as the
real part.  Sends are buffered, receives match on ``(source, tag)`` and are
FIFO per ordered rank pair.
"""

from __future__ import annotations

import collections
import multiprocessing
import socket
import struct
import threading
import time
import traceback
from collections.abc import Callable, Sequence
from typing import Any

import numpy as np

PAYLOAD_DTYPE = np.dtype("<c16")
FRAME_HEADER = struct.Struct("<IQ")
_HANDSHAKE = struct.Struct("<I")

MAX_USER_TAG = 0x7FFF
_TAG_BCAST = 0x8001
_TAG_GATHER = 0x8002
_TAG_EXCHANGE = 0x8003


class TransportError(RuntimeError):
    pass


class DeadlockError(TransportError):
    pass


def _as_payload(buf) -> np.ndarray:
    arr = np.asarray(buf)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    return np.array(arr, dtype=PAYLOAD_DTYPE, copy=True)


class Communicator:
    """A set of ranks that can talk to each other.

    ``members`` lists the world ranks in communicator-rank order.  All
    collectives are built from ordered point-to-point messages, so every
    member must call them in the same sequence.
    """

    def __init__(self, endpoint, members: Sequence[int], ctx: int = 0):
        self._ep = endpoint
        self.members = tuple(members)
        self.rank = self.members.index(endpoint.rank)
        self.size = len(self.members)
        self.ctx = ctx
        self._n_splits = 0

    def __repr__(self):
        return f"Communicator(rank={self.rank}, size={self.size}, ctx={self.ctx})"

    @property
    def world_rank(self) -> int:
        return self._ep.rank

    @property
    def endpoint(self):
        return self._ep

    def _wire_tag(self, tag: int) -> int:
        return (self.ctx << 16) | tag

    def _check_peer(self, peer: int) -> None:
        if not 0 <= peer < self.size:
            raise TransportError(f"peer {peer} out of range for communicator of size {self.size}")

    # point to point

    def send(self, dest: int, buf, tag: int = 0) -> None:
        self._check_peer(dest)
        self._ep.post(self.members[dest], self._wire_tag(tag), _as_payload(buf))

    def recv(self, source: int, tag: int = 0) -> np.ndarray:
        self._check_peer(source)
        return self._ep.take(self.members[source], self._wire_tag(tag))

    def exchange_block(self, peer: int, send_buf, recv_buf: np.ndarray | None = None) -> np.ndarray:
        """Swap equal-length blocks with ``peer``; both sides must call this.

        The lower rank sends first and the higher rank receives first, so the
        pairing cannot deadlock even on a transport with unbuffered sends.
        The received block is written into ``recv_buf`` when one is given and
        returned either way.
        """
        self._check_peer(peer)
        send_arr = _as_payload(send_buf)
        if recv_buf is not None and len(recv_buf) != len(send_arr):
            raise TransportError(
                f"block length mismatch: sending {len(send_arr)}, receive buffer {len(recv_buf)}"
            )
        if peer == self.rank:
            got = send_arr
        elif len(send_arr) == 0:
            got = send_arr
        elif self.rank < peer:
            self.send(peer, send_arr, _TAG_EXCHANGE)
            got = self.recv(peer, _TAG_EXCHANGE)
        else:
            got = self.recv(peer, _TAG_EXCHANGE)
            self.send(peer, send_arr, _TAG_EXCHANGE)
        if len(got) != len(send_arr):
            raise TransportError(f"peer {peer} sent {len(got)} amplitudes, expected {len(send_arr)}")
        if recv_buf is not None:
            recv_buf[...] = got
            return recv_buf
        return got

    # collectives

    def bcast(self, buf, root: int = 0) -> np.ndarray:
        self._check_peer(root)
        if self.rank == root:
            data = _as_payload(buf)
            for r in range(self.size):
                if r != root:
                    self.send(r, data, _TAG_BCAST)
            return data
        return self.recv(root, _TAG_BCAST)

    def gather(self, buf, root: int = 0) -> list[np.ndarray] | None:
        """Collect one block from every rank at ``root``, in rank order."""
        self._check_peer(root)
        if self.rank != root:
            self.send(root, buf, _TAG_GATHER)
            return None
        return [
            _as_payload(buf) if r == root else self.recv(r, _TAG_GATHER)
            for r in range(self.size)
        ]

    def gather_concat(self, buf, root: int = 0) -> np.ndarray | None:
        parts = self.gather(buf, root)
        return None if parts is None else np.concatenate(parts)

    def allgather(self, buf) -> list[np.ndarray]:
        return [self.bcast(buf if r == self.rank else None, root=r) for r in range(self.size)]

    def allreduce_sum(self, buf) -> np.ndarray:
        # Root sums in rank order so every rank sees identical bits.
        parts = self.gather(buf, root=0)
        total = None
        if parts is not None:
            total = parts[0].copy()
            for part in parts[1:]:
                total += part
        return self.bcast(total, root=0)

    def bcast_int(self, value: int | None, root: int = 0) -> int:
        data = self.bcast(None if self.rank != root else [value], root=root)
        return int(round(data[0].real))

    def barrier(self) -> None:
        self.allreduce_sum(np.zeros(1))

    def split(self, color: int, key: int | None = None) -> Communicator | None:
        """Partition into sub-communicators by ``color``; ordered by ``(key, rank)``.

        A negative colour opts out and returns ``None``.
        """
        key = self.rank if key is None else key
        info = self.allgather([color, key])
        self._n_splits += 1
        if color < 0:
            return None
        peers = sorted(
            (int(round(row[1].real)), r)
            for r, row in enumerate(info)
            if int(round(row[0].real)) == color
        )
        members = [self.members[r] for _, r in peers]
        ctx = self.ctx * 8 + 1 + (self._n_splits - 1) % 7
        if ctx >= 1 << 15:
            raise TransportError("communicator split nesting too deep")
        return Communicator(self._ep, members, ctx)

    def subgroup(self, ranks: Sequence[int]) -> Communicator:
        """Sub-communicator over ``ranks`` (communicator ranks, in order) with no messaging.

        Every rank must call this in the same sequence, each passing the
        rank list of the group it belongs to.
        """
        if self.rank not in ranks:
            raise TransportError(f"rank {self.rank} is not in the requested group")
        self._n_splits += 1
        ctx = self.ctx * 8 + 1 + (self._n_splits - 1) % 7
        if ctx >= 1 << 15:
            raise TransportError("communicator split nesting too deep")
        return Communicator(self._ep, [self.members[r] for r in ranks], ctx)

    def messages_to(self, world_ranks) -> int:
        """Messages this endpoint has sent so far to any of ``world_ranks``."""
        return sum(self._ep.sent[r] for r in world_ranks)

    @property
    def messages_sent(self) -> int:
        return sum(self._ep.sent.values())


# in-process world


class _LocalEndpoint:
    def __init__(self, world: LocalWorld, rank: int):
        self.world = world
        self.rank = rank
        self.sent: collections.Counter = collections.Counter()

    def post(self, dest: int, tag: int, payload: np.ndarray) -> None:
        if dest != self.rank:
            self.sent[dest] += 1
        self.world._post(self.rank, dest, tag, payload)

    def take(self, source: int, tag: int) -> np.ndarray:
        return self.world._take(source, self.rank, tag)


class LocalWorld:
    """All ranks of one run living in this process."""

    def __init__(self, size: int, mode: str = "scheduled"):
        if mode not in ("scheduled", "threaded"):
            raise ValueError(f"unknown local transport mode {mode!r}")
        if size < 1:
            raise ValueError("need at least one rank")
        self.size = size
        self.mode = mode
        self._cond = threading.Condition()
        self._boxes: dict[tuple[int, int], collections.deque] = collections.defaultdict(collections.deque)
        self._blocked: dict[int, tuple[int, int]] = {}
        self._finished: set[int] = set()
        self._running = 0
        self._abort: TransportError | None = None
        self.endpoints = [_LocalEndpoint(self, r) for r in range(size)]

    def _post(self, src, dst, tag, payload):
        with self._cond:
            self._boxes[(src, dst)].append((tag, payload))
            self._cond.notify_all()

    def _available(self, dst: int) -> bool:
        src, tag = self._blocked[dst]
        return any(t == tag for t, _ in self._boxes[(src, dst)])

    def _pop(self, src, dst, tag):
        box = self._boxes[(src, dst)]
        for i, (t, payload) in enumerate(box):
            if t == tag:
                del box[i]
                return payload
        return None

    def _deadlocked(self) -> bool:
        live = [r for r in range(self.size) if r not in self._finished]
        return bool(live) and all(r in self._blocked and not self._available(r) for r in live)

    def _next_runnable(self, me: int) -> int | None:
        for off in range(1, self.size + 1):
            r = (me + off) % self.size
            if r in self._finished:
                continue
            if r not in self._blocked or self._available(r):
                return r
        return None

    def _hand_off(self, me: int) -> None:
        nxt = self._next_runnable(me)
        if nxt is None:
            if len(self._finished) < self.size:
                self._fail(DeadlockError(f"all live ranks blocked on receive: {sorted(self._blocked.items())}"))
            return
        self._running = nxt
        self._cond.notify_all()

    def _fail(self, err: TransportError) -> None:
        if self._abort is None:
            self._abort = err
        self._cond.notify_all()

    def _take(self, src, dst, tag):
        with self._cond:
            while True:
                if self._abort is not None:
                    raise self._abort
                payload = self._pop(src, dst, tag)
                if payload is not None:
                    self._blocked.pop(dst, None)
                    return payload
                self._blocked[dst] = (src, tag)
                if self.mode == "scheduled":
                    self._hand_off(dst)
                    while self._running != dst and self._abort is None:
                        self._cond.wait()
                else:
                    if self._deadlocked():
                        self._fail(DeadlockError(f"all live ranks blocked on receive: {sorted(self._blocked.items())}"))
                        continue
                    self._cond.wait()

    def run(self, fn: Callable[[Communicator], Any]) -> list[Any]:
        results: list[Any] = [None] * self.size
        errors: list[tuple[int, BaseException]] = []

        def main(rank: int):
            try:
                with self._cond:
                    while self.mode == "scheduled" and self._running != rank and self._abort is None:
                        self._cond.wait()
                    if self._abort is not None:
                        return
                comm = Communicator(self.endpoints[rank], range(self.size))
                results[rank] = fn(comm)
            except TransportError as err:
                if not isinstance(err, DeadlockError) and err is self._abort:
                    return
                errors.append((rank, err))
                with self._cond:
                    self._fail(err if isinstance(err, DeadlockError) else TransportError(f"rank {rank} failed"))
            except BaseException as err:
                errors.append((rank, err))
                with self._cond:
                    self._fail(TransportError(f"rank {rank} failed"))
            finally:
                with self._cond:
                    self._finished.add(rank)
                    self._blocked.pop(rank, None)
                    if self.mode == "scheduled":
                        if self._running == rank:
                            self._hand_off(rank)
                    elif self._deadlocked():
                        self._fail(DeadlockError("all live ranks blocked on receive"))
                    self._cond.notify_all()

        threads = [
            threading.Thread(target=main, args=(r,), name=f"rank-{r}", daemon=True)
            for r in range(self.size)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            errors.sort(key=lambda item: (isinstance(item[1], TransportError), item[0]))
            raise errors[0][1]
        return results


# socket world


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = bytearray()
    while len(chunks) < n:
        piece = sock.recv(n - len(chunks))
        if not piece:
            return None
        chunks += piece
    return bytes(chunks)


def encode_frame(tag: int, payload) -> bytes:
    data = _as_payload(payload).tobytes()
    return FRAME_HEADER.pack(tag, len(data)) + data


def decode_frame(header: bytes, body: bytes) -> tuple[int, np.ndarray]:
    tag, length = FRAME_HEADER.unpack(header)
    if length != len(body):
        raise TransportError(f"frame declares {length} bytes, got {len(body)}")
    return tag, np.frombuffer(body, dtype=PAYLOAD_DTYPE).astype(np.complex128)


class _SocketEndpoint:
    def __init__(self, rank: int, size: int, base_port: int, host: str = "127.0.0.1", timeout: float = 60.0):
        self.rank = rank
        self.size = size
        self.timeout = timeout
        self.sent: collections.Counter = collections.Counter()
        self._cond = threading.Condition()
        self._boxes: dict[int, collections.deque] = collections.defaultdict(collections.deque)
        self._locks: dict[int, threading.Lock] = {}
        self._socks: dict[int, socket.socket] = {}
        self._closed = False

        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, base_port + rank))
        listener.listen(size)
        for peer in range(rank):
            deadline = time.monotonic() + timeout
            while True:
                try:
                    s = socket.create_connection((host, base_port + peer), timeout=timeout)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise TransportError(f"rank {rank} could not reach rank {peer}")
                    time.sleep(0.02)
            s.sendall(_HANDSHAKE.pack(rank))
            self._socks[peer] = s
        listener.settimeout(timeout)
        for _ in range(size - 1 - rank):
            s, _ = listener.accept()
            (peer,) = _HANDSHAKE.unpack(_recv_exact(s, _HANDSHAKE.size))
            self._socks[peer] = s
        listener.close()
        for peer, s in self._socks.items():
            s.settimeout(None)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._locks[peer] = threading.Lock()
            threading.Thread(target=self._reader, args=(peer, s), daemon=True).start()

    def _reader(self, peer: int, s: socket.socket) -> None:
        while True:
            try:
                header = _recv_exact(s, FRAME_HEADER.size)
                if header is None:
                    return
                _, length = FRAME_HEADER.unpack(header)
                body = _recv_exact(s, length) if length else b""
                if body is None:
                    return
            except OSError:
                return
            tag, payload = decode_frame(header, body)
            with self._cond:
                self._boxes[peer].append((tag, payload))
                self._cond.notify_all()

    def post(self, dest: int, tag: int, payload: np.ndarray) -> None:
        if dest == self.rank:
            with self._cond:
                self._boxes[dest].append((tag, payload))
                self._cond.notify_all()
            return
        self.sent[dest] += 1
        frame = encode_frame(tag, payload)
        with self._locks[dest]:
            self._socks[dest].sendall(frame)

    def take(self, source: int, tag: int) -> np.ndarray:
        deadline = time.monotonic() + self.timeout
        with self._cond:
            while True:
                box = self._boxes[source]
                for i, (t, payload) in enumerate(box):
                    if t == tag:
                        del box[i]
                        return payload
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TransportError(f"rank {self.rank} timed out waiting on rank {source}")
                self._cond.wait(remaining)

    def close(self) -> None:
        for s in self._socks.values():
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()


def _port_block_free(base: int, size: int, host: str) -> bool:
    for port in range(base, base + size):
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            try:
                s.bind((host, port))
            except OSError:
                return False
    return True


def find_free_port_block(size: int, host: str = "127.0.0.1", start: int = 40000) -> int:
    for base in range(start, 65000 - size, size + 7):
        if _port_block_free(base, size, host):
            return base
    raise TransportError("no free block of local ports")


def _socket_rank_main(rank, size, base_port, host, timeout, fn, queue):
    try:
        ep = _SocketEndpoint(rank, size, base_port, host, timeout)
        try:
            comm = Communicator(ep, range(size))
            result = fn(comm)
            comm.barrier()
        finally:
            ep.close()
        queue.put((rank, True, result))
    except BaseException:
        queue.put((rank, False, traceback.format_exc()))


def _run_socket(size: int, fn, port: int | None, host: str, timeout: float) -> list[Any]:
    base = find_free_port_block(size, host) if not port else port
    ctx = multiprocessing.get_context("fork")
    queue = ctx.Queue()
    procs = [
        ctx.Process(target=_socket_rank_main, args=(r, size, base, host, timeout, fn, queue), daemon=True)
        for r in range(size)
    ]
    for p in procs:
        p.start()
    results: list[Any] = [None] * size
    failures = []
    try:
        for _ in range(size):
            rank, ok, value = queue.get(timeout=timeout + 30)
            if ok:
                results[rank] = value
            else:
                failures.append((rank, value))
    except Exception as err:
        raise TransportError(f"socket ranks did not report back: {err}") from err
    finally:
        for p in procs:
            p.join(timeout=5)
            if p.is_alive():
                p.kill()
    if failures:
        rank, tb = sorted(failures)[0]
        raise TransportError(f"rank {rank} failed:\n{tb}")
    return results


def run_spmd(
    size: int,
    fn: Callable[[Communicator], Any],
    transport: str = "local",
    mode: str = "scheduled",
    port: int | None = None,
    host: str = "127.0.0.1",
    timeout: float = 120.0,
) -> list[Any]:
    """Run ``fn(comm)`` on ``size`` ranks and return the per-rank results."""
    if transport == "local":
        return LocalWorld(size, mode).run(fn)
    if transport == "socket":
        return _run_socket(size, fn, port, host, timeout)
    raise ValueError(f"unknown transport {transport!r}")
