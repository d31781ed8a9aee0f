"""Minimal server-side WebSocket (RFC 6455) over asyncio streams.

Enough protocol for the dashboard and test clients: the upgrade handshake,
text/close/ping/pong frames, client masking, and fragmented messages. The
same listening socket doubles as a plain HTTP file server for the
dashboard's static assets when a request is not an upgrade.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import mimetypes
import os
import struct
from pathlib import Path
from typing import Optional

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

# Hard frame cap; the JSON layer enforces the 1 MiB protocol limit and
# answers oversize with a reject, this only guards memory.
MAX_FRAME_BYTES = 8 * 1024 * 1024


class WsError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


async def read_http_request(
    reader: asyncio.StreamReader,
) -> Optional[tuple[str, str, dict[str, str]]]:
    """Parse a request line + headers; None on EOF before any bytes."""
    try:
        line = await reader.readline()
    except (asyncio.LimitOverrunError, ValueError):
        raise WsError("request line too long")
    if not line:
        return None
    try:
        method, path, _ = line.decode("latin-1").split(" ", 2)
    except ValueError:
        raise WsError(f"bad request line {line!r}")
    headers: dict[str, str] = {}
    while True:
        line = await reader.readline()
        if line in (b"\r\n", b"\n", b""):
            break
        name, _, value = line.decode("latin-1").partition(":")
        headers[name.strip().lower()] = value.strip()
    return method, path, headers


def is_upgrade(headers: dict[str, str]) -> bool:
    return (
        "websocket" in headers.get("upgrade", "").lower()
        and "sec-websocket-key" in headers
    )


def handshake_response(headers: dict[str, str]) -> bytes:
    key = accept_key(headers["sec-websocket-key"])
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {key}\r\n"
        "\r\n"
    ).encode("ascii")


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytes([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0
    if length < 126:
        head += bytes([mask_bit | length])
    elif length < 1 << 16:
        head += bytes([mask_bit | 126]) + struct.pack(">H", length)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", length)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


def encode_text(text: str, mask: bool = False) -> bytes:
    return encode_frame(OP_TEXT, text.encode("utf-8"), mask=mask)


def encode_close(code: int = 1000) -> bytes:
    return encode_frame(OP_CLOSE, struct.pack(">H", code))


async def _read_frame(reader: asyncio.StreamReader) -> tuple[bool, int, bytes]:
    head = await reader.readexactly(2)
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", await reader.readexactly(8))[0]
    if length > MAX_FRAME_BYTES:
        raise WsError(f"frame of {length} bytes exceeds cap")
    key = await reader.readexactly(4) if masked else None
    payload = await reader.readexactly(length) if length else b""
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return fin, opcode, payload


async def read_message(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter
) -> Optional[str]:
    """Next complete text message; answers pings; None once closed."""
    buffer = b""
    fragmented = False
    while True:
        try:
            fin, opcode, payload = await _read_frame(reader)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            return None
        if opcode == OP_CLOSE:
            try:
                writer.write(encode_close())
                await writer.drain()
            except (ConnectionError, RuntimeError):
                pass
            return None
        if opcode == OP_PING:
            writer.write(encode_frame(OP_PONG, payload))
            await writer.drain()
            continue
        if opcode == OP_PONG:
            continue
        if opcode in (OP_TEXT, OP_BINARY):
            if fragmented:
                raise WsError("new message started mid-fragment")
            buffer = payload
            fragmented = not fin
        elif opcode == OP_CONT:
            if not fragmented:
                raise WsError("continuation without start")
            buffer += payload
            if len(buffer) > MAX_FRAME_BYTES:
                raise WsError("fragmented message exceeds cap")
            fragmented = not fin
        else:
            raise WsError(f"unsupported opcode {opcode}")
        if not fragmented:
            try:
                return buffer.decode("utf-8")
            except UnicodeDecodeError:
                raise WsError("text frame is not UTF-8") from None


# ---------------------------------------------------------------------------
# Plain-HTTP static files (dashboard assets)


def _http_response(
    status: str, body: bytes, content_type: str = "text/plain; charset=utf-8"
) -> bytes:
    return (
        f"HTTP/1.1 {status}\r\n"
        f"Content-Type: {content_type}\r\n"
        f"Content-Length: {len(body)}\r\n"
        "Connection: close\r\n"
        "\r\n"
    ).encode("ascii") + body


def static_response(static_dir: Optional[Path], path: str) -> bytes:
    if static_dir is None:
        return _http_response("404 Not Found", b"no static assets configured\n")
    rel = path.split("?", 1)[0].lstrip("/") or "index.html"
    target = (static_dir / rel).resolve()
    try:
        target.relative_to(static_dir.resolve())
    except ValueError:
        return _http_response("403 Forbidden", b"forbidden\n")
    if target.is_dir():
        target = target / "index.html"
    if not target.is_file():
        return _http_response("404 Not Found", b"not found\n")
    ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
    return _http_response("200 OK", target.read_bytes(), ctype)
