"""Length-prefixed JSON framing used between the harness and its workers.

Each message is a 4-byte big-endian length followed by that many bytes of
UTF-8 JSON.
"""

from __future__ import annotations

import json
import os
import select
import struct
import time

_HEADER = struct.Struct(">I")
MAX_MESSAGE = 256 * 1024 * 1024


class WireClosed(EOFError):
    """Peer closed the pipe."""


class WireTimeout(TimeoutError):
    pass


def encode(obj) -> bytes:
    body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(len(body)) + body


def send(fd: int, obj) -> None:
    data = encode(obj)
    view = memoryview(data)
    while view:
        written = os.write(fd, view)
        view = view[written:]


def _read_exact(fd: int, size: int, deadline: float | None) -> bytes:
    chunks = []
    remaining = size
    while remaining:
        if deadline is not None:
            wait = deadline - time.monotonic()
            if wait <= 0:
                raise WireTimeout(f"no reply within deadline ({remaining} bytes pending)")
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                continue
        chunk = os.read(fd, min(remaining, 1 << 20))
        if not chunk:
            raise WireClosed("peer closed the pipe")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv(fd: int, timeout: float | None = None):
    deadline = None if timeout is None else time.monotonic() + timeout
    (size,) = _HEADER.unpack(_read_exact(fd, _HEADER.size, deadline))
    if size > MAX_MESSAGE:
        raise ValueError(f"message of {size} bytes exceeds limit")
    return json.loads(_read_exact(fd, size, deadline).decode("utf-8"))
