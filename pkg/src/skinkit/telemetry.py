"""Binary frame codec and UDP transport for multizone range frames.

Wire layout (little-endian, 144 bytes)::

    0   2s   magic b"TF"
    2   u8   version (1)
    3   u8   sensor index
    4   u32  sequence
    8   u64  timestamp, microseconds
    16  64 x u16 ranges in mm, row-major, 0xFFFF = no target
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    BadMagic,
    FrameDecodeError,
    InputError,
    NetworkError,
    OversizeDatagram,
    ShortDatagram,
    UnsupportedVersion,
)
from .frustum import SENTINEL

log = logging.getLogger(__name__)

MAGIC = b"TF"
VERSION = 1
N_ZONES = 64
_STRUCT = struct.Struct("<2sBBIQ64H")
FRAME_SIZE = _STRUCT.size
assert FRAME_SIZE == 144


@dataclass(frozen=True)
class ToFFrame:
    sensor_index: int
    sequence: int
    timestamp_us: int
    ranges_mm: tuple

    def __post_init__(self):
        if len(self.ranges_mm) != N_ZONES:
            raise ValueError(f"frame needs {N_ZONES} ranges, got {len(self.ranges_mm)}")
        if not isinstance(self.ranges_mm, tuple):
            object.__setattr__(self, "ranges_mm", tuple(int(r) for r in self.ranges_mm))

    @property
    def valid_count(self):
        return N_ZONES - self.ranges_mm.count(SENTINEL)


def encode_frame(frame: ToFFrame) -> bytes:
    try:
        return _STRUCT.pack(MAGIC, VERSION, frame.sensor_index, frame.sequence,
                            frame.timestamp_us, *frame.ranges_mm)
    except struct.error as exc:
        raise ValueError(f"frame field out of range: {exc}") from exc


def decode_frame(data: bytes) -> ToFFrame:
    n = len(data)
    if n < FRAME_SIZE:
        raise ShortDatagram(f"datagram of {n} bytes, need {FRAME_SIZE}")
    if data[:2] != MAGIC:
        raise BadMagic(f"bad magic {bytes(data[:2])!r}")
    if data[2] != VERSION:
        raise UnsupportedVersion(f"unsupported version {data[2]}")
    if n > FRAME_SIZE:
        raise OversizeDatagram(f"datagram of {n} bytes, expected {FRAME_SIZE}")
    f = _STRUCT.unpack(data)
    return ToFFrame(f[2], f[3], f[4], f[5:])


# --- files ------------------------------------------------------------------


def write_frame_file(frames, path) -> int:
    n = 0
    with open(path, "wb") as fh:
        for fr in frames:
            fh.write(encode_frame(fr))
            n += 1
    return n


def read_frame_file(path) -> list[ToFFrame]:
    """Concatenated wire records; any malformed record rejects the file."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read frame file {path}: {exc}") from exc
    if len(data) % FRAME_SIZE:
        raise InputError(f"{path}: size {len(data)} is not a multiple of {FRAME_SIZE}")
    frames = []
    for off in range(0, len(data), FRAME_SIZE):
        try:
            frames.append(decode_frame(data[off: off + FRAME_SIZE]))
        except FrameDecodeError as exc:
            raise InputError(f"{path}: record {off // FRAME_SIZE}: {exc}") from exc
    return frames


# --- statistics ---------------------------------------------------------------


@dataclass
class SessionStats:
    frames_received: Counter = field(default_factory=Counter)
    decode_errors: Counter = field(default_factory=Counter)
    out_of_order: Counter = field(default_factory=Counter)
    _seqs: dict = field(default_factory=lambda: defaultdict(set), repr=False)
    _last: dict = field(default_factory=dict, repr=False)

    def record(self, frame: ToFFrame):
        s = frame.sensor_index
        self.frames_received[s] += 1
        self._seqs[s].add(frame.sequence)
        if s in self._last and frame.sequence <= self._last[s]:
            self.out_of_order[s] += 1
        else:
            self._last[s] = frame.sequence

    def record_error(self, code: str):
        self.decode_errors[code] += 1

    @property
    def gaps(self) -> dict:
        """Missing sequence numbers per sensor (no wraparound handling)."""
        return {s: (max(q) - min(q) + 1) - len(q) for s, q in self._seqs.items()}

    @property
    def total_frames(self):
        return sum(self.frames_received.values())

    @property
    def total_errors(self):
        return sum(self.decode_errors.values())

    def to_dict(self):
        gaps = self.gaps
        return {
            "frames_received": {str(k): v for k, v in sorted(self.frames_received.items())},
            "sequence_gaps": {str(k): gaps[k] for k in sorted(gaps)},
            "out_of_order": {str(k): v for k, v in sorted(self.out_of_order.items())},
            "decode_errors": dict(sorted(self.decode_errors.items())),
            "total_frames": self.total_frames,
            "total_gaps": sum(gaps.values()),
        }


# --- UDP ----------------------------------------------------------------------


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = str(text).rpartition(":")
    if not sep:
        raise ValueError(f"address {text!r} must be host:port")
    try:
        p = int(port)
    except ValueError:
        raise ValueError(f"bad port in {text!r}") from None
    if not 0 <= p <= 65535:
        raise ValueError(f"port out of range in {text!r}")
    return host or "0.0.0.0", p


@dataclass
class EmitReport:
    attempted: int = 0
    sent: int = 0
    errors: int = 0
    per_sensor: Counter = field(default_factory=Counter)
    send_times: dict = field(default_factory=lambda: defaultdict(list))


def emit(frames, destination, rate_hz: float, sock=None) -> EmitReport:
    """Send one datagram per frame, pacing each sensor at ``rate_hz``.

    Best effort: send errors are counted, not raised.
    """
    if not rate_hz > 0:
        raise ValueError("rate_hz must be > 0")
    host, port = parse_address(destination) if isinstance(destination, str) else tuple(destination)
    try:
        dest = socket.getaddrinfo(host, port, socket.AF_INET, socket.SOCK_DGRAM)[0][4]
    except socket.gaierror as exc:
        raise NetworkError(f"cannot resolve {host}:{port}: {exc}") from exc
    period = 1.0 / rate_hz
    own = sock is None
    try:
        if own:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        report = EmitReport()
        next_due = {}
        for fr in frames:
            due = next_due.get(fr.sensor_index)
            now = time.monotonic()
            if due is not None and due > now:
                time.sleep(due - now)
            sent_at = time.monotonic()
            next_due[fr.sensor_index] = (due if due is not None else sent_at) + period
            report.attempted += 1
            try:
                sock.sendto(encode_frame(fr), dest)
                report.sent += 1
            except OSError as exc:
                report.errors += 1
                log.debug("send failed: %s", exc)
            report.per_sensor[fr.sensor_index] += 1
            report.send_times[fr.sensor_index].append(sent_at)
        return report
    except OSError as exc:
        raise NetworkError(f"socket failure: {exc}") from exc
    finally:
        if own and sock is not None:
            sock.close()


class Collector:
    """UDP receiver thread feeding an ordered queue of decoded frames.

    The receiver is the only writer of ``stats``; consumers read frames from
    :meth:`get` or iterate :meth:`drain` while reception continues.
    """

    def __init__(self, listen="127.0.0.1:0", rcvbuf=1 << 22):
        host, port = parse_address(listen) if isinstance(listen, str) else listen
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
            self.sock.bind((host, port))
        except OSError as exc:
            self.sock.close()
            raise NetworkError(f"cannot bind {host}:{port}: {exc}") from exc
        self.sock.settimeout(0.02)
        self.stats = SessionStats()
        self.queue: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._thread = None

    @property
    def address(self):
        return self.sock.getsockname()

    def start(self):
        self._thread = threading.Thread(target=self._run, name="tof-collector", daemon=True)
        self._thread.start()
        return self

    def _run(self):
        while not self._stop.is_set():
            try:
                data, _ = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self.handle_datagram(data)

    def handle_datagram(self, data: bytes):
        try:
            fr = decode_frame(data)
        except FrameDecodeError as exc:
            self.stats.record_error(exc.code)
            return None
        self.stats.record(fr)
        self.queue.put(fr)
        return fr

    def get(self, timeout=None):
        return self.queue.get(timeout=timeout)

    def drain(self):
        out = []
        while True:
            try:
                out.append(self.queue.get_nowait())
            except queue.Empty:
                return out

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
        self.sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def collect(listen, duration: float | None = None, max_frames: int | None = None,
            idle_timeout: float | None = None, on_frame=None):
    """Receive until ``duration`` elapses, ``max_frames`` arrive, or traffic idles.

    Returns ``(frames, stats)`` with frames in arrival order. ``on_frame`` is
    called from the consuming side for each frame as it is taken off the queue.
    """
    if duration is None and max_frames is None and idle_timeout is None:
        raise ValueError("collect needs a duration, frame budget or idle timeout")
    col = listen if isinstance(listen, Collector) else Collector(listen)
    if col._thread is None:
        col.start()
    frames = []
    t0 = last = time.monotonic()
    try:
        while True:
            now = time.monotonic()
            if duration is not None and now - t0 >= duration:
                break
            if idle_timeout is not None and now - last >= idle_timeout:
                break
            if max_frames is not None and len(frames) >= max_frames:
                break
            try:
                fr = col.get(timeout=0.01)
            except queue.Empty:
                continue
            last = time.monotonic()
            frames.append(fr)
            if on_frame is not None:
                on_frame(fr)
    finally:
        col.stop()
    for fr in col.drain():
        if max_frames is None or len(frames) < max_frames:
            frames.append(fr)
            if on_frame is not None:
                on_frame(fr)
    return frames, col.stats
