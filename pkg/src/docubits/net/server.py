"""Authoritative asyncio server: TCP (newline-delimited JSON) + WebSocket.

One ServerCore behind both endpoints. The event loop itself is the ordered
funnel: every received message is handled synchronously (no awaits inside
the engine), so commits get their seq in arrival order and broadcasts
preserve per-client ordering through the stream writers.
"""

from __future__ import annotations

import asyncio
import logging
from pathlib import Path
from typing import Optional

from .. import session as session_mod
from ..config import EngineConfig
from ..errors import IoFailure
from ..persist import EventLogWriter, save_snapshot
from ..session import SessionState
from . import ws
from .protocol import MAX_MESSAGE_BYTES, ServerCore

log = logging.getLogger(__name__)

_READ_CHUNK = 65536


class SessionServer:
    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        initial_state: Optional[SessionState] = None,
        log_path: Optional[str] = None,
        snapshot_out: Optional[str] = None,
        static_dir: Optional[str] = None,
    ):
        self._log_writer = None
        if log_path:
            last = initial_state.last_seq if initial_state else 0
            self._log_writer = EventLogWriter(log_path, last_seq=last)
        self.core = ServerCore(
            state=initial_state,
            config=config,
            on_commit=self._log_writer.append if self._log_writer else None,
        )
        self.snapshot_out = snapshot_out
        self.static_dir = Path(static_dir) if static_dir else None
        self._senders: dict[int, asyncio.StreamWriter] = {}
        self._ws_conns: set[int] = set()
        self._next_conn = 1
        self._t0: Optional[float] = None
        self._servers: list[asyncio.base_events.Server] = []
        self.tcp_port: Optional[int] = None
        self.ws_port: Optional[int] = None

    # -- lifecycle --------------------------------------------------------

    async def start(self, host: str, tcp_port: int, ws_port: Optional[int]) -> None:
        loop = asyncio.get_running_loop()
        self._t0 = loop.time()
        try:
            tcp = await asyncio.start_server(
                self._serve_tcp, host, tcp_port, limit=MAX_MESSAGE_BYTES + 4096
            )
        except OSError as exc:
            raise IoFailure(f"cannot bind {host}:{tcp_port}: {exc}") from exc
        self._servers.append(tcp)
        self.tcp_port = tcp.sockets[0].getsockname()[1]
        if ws_port is not None:
            try:
                http = await asyncio.start_server(
                    self._serve_http, host, ws_port, limit=MAX_MESSAGE_BYTES + 4096
                )
            except OSError as exc:
                raise IoFailure(f"cannot bind {host}:{ws_port}: {exc}") from exc
            self._servers.append(http)
            self.ws_port = http.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        for server in self._servers:
            server.close()
            await server.wait_closed()
        for writer in list(self._senders.values()):
            writer.close()
        if self.snapshot_out:
            save_snapshot(self.core.state, self.snapshot_out)
            log.info("snapshot written to %s", self.snapshot_out)
        if self._log_writer:
            self._log_writer.close()

    def now_ms(self) -> int:
        loop = asyncio.get_running_loop()
        return int((loop.time() - (self._t0 or loop.time())) * 1000)

    # -- dispatch ---------------------------------------------------------

    def _send(self, conn_id: int, line: str) -> None:
        writer = self._senders.get(conn_id)
        if writer is None:
            return
        try:
            if conn_id in self._ws_conns:
                writer.write(ws.encode_text(line))
            else:
                writer.write(line.encode("utf-8") + b"\n")
        except (ConnectionError, RuntimeError):
            pass

    def _dispatch(self, outs: list[tuple[int, str]]) -> None:
        for conn_id, line in outs:
            self._send(conn_id, line)

    def _handle(self, conn_id: int, line: str) -> None:
        self._dispatch(self.core.handle_line(conn_id, line, self.now_ms()))

    def _drop(self, conn_id: int) -> None:
        self._senders.pop(conn_id, None)
        self._ws_conns.discard(conn_id)
        self._dispatch(self.core.disconnect(conn_id, self.now_ms()))

    # -- TCP endpoint -------------------------------------------------------

    async def _serve_tcp(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        conn_id = self._next_conn
        self._next_conn += 1
        self.core.connect(conn_id)
        self._senders[conn_id] = writer
        try:
            buffer = b""
            skipping = False
            while True:
                chunk = await reader.read(_READ_CHUNK)
                if not chunk:
                    break
                buffer += chunk
                while True:
                    nl = buffer.find(b"\n")
                    if nl < 0:
                        break
                    line, buffer = buffer[:nl], buffer[nl + 1:]
                    if skipping:
                        skipping = False  # tail of an oversize line
                        continue
                    self._handle(conn_id, line.decode("utf-8", errors="replace"))
                if len(buffer) >= MAX_MESSAGE_BYTES:
                    # oversize line: reject once, discard until newline
                    buffer = b""
                    skipping = True
                    self._handle(conn_id, "\x00oversize")
        except (ConnectionResetError, asyncio.IncompleteReadError):
            pass
        finally:
            self._drop(conn_id)
            writer.close()

    # -- WebSocket + static HTTP endpoint -----------------------------------

    async def _serve_http(
        self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter
    ) -> None:
        try:
            request = await ws.read_http_request(reader)
        except ws.WsError:
            writer.close()
            return
        if request is None:
            writer.close()
            return
        method, path, headers = request
        if not ws.is_upgrade(headers):
            try:
                writer.write(ws.static_response(self.static_dir, path))
                await writer.drain()
            except (ConnectionError, RuntimeError):
                pass
            writer.close()
            return

        writer.write(ws.handshake_response(headers))
        conn_id = self._next_conn
        self._next_conn += 1
        self.core.connect(conn_id)
        self._senders[conn_id] = writer
        self._ws_conns.add(conn_id)
        try:
            while True:
                message = await ws.read_message(reader, writer)
                if message is None:
                    break
                self._handle(conn_id, message)
        except (ws.WsError, ConnectionResetError):
            pass
        finally:
            self._drop(conn_id)
            writer.close()


async def serve_forever(
    host: str,
    tcp_port: int,
    ws_port: Optional[int],
    config: Optional[EngineConfig] = None,
    initial_state: Optional[SessionState] = None,
    log_path: Optional[str] = None,
    snapshot_out: Optional[str] = None,
    static_dir: Optional[str] = None,
    on_ready=None,
    shutdown: Optional[asyncio.Event] = None,
) -> None:
    """Run until the shutdown event (or cancellation)."""
    server = SessionServer(
        config=config,
        initial_state=initial_state,
        log_path=log_path,
        snapshot_out=snapshot_out,
        static_dir=static_dir,
    )
    await server.start(host, tcp_port, ws_port)
    log.info("listening on tcp %s ws %s", server.tcp_port, server.ws_port)
    if on_ready is not None:
        on_ready(server)
    try:
        await (shutdown.wait() if shutdown is not None else asyncio.Event().wait())
    finally:
        await server.stop()
