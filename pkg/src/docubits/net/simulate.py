"""In-process latency simulation on a virtual clock.

A desk-scale stand-in for a room full of headsets: one ServerCore, k
scripted ClientCores, and a discrete-event queue instead of sockets.
Deliveries are delayed by latency +/- uniform jitter from a seeded
generator, with per-link FIFO preserved (the real transports are streams).
Virtual time makes runs with hundreds of milliseconds of jitter finish in
milliseconds and makes every run bit-reproducible from its seed.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..config import EngineConfig
from ..session import Committed, SessionState
from .protocol import ClientCore, ServerCore


@dataclass
class ConvergenceReport:
    seed: int
    clients: int
    latency_ms: int
    jitter_ms: int
    commit_count: int
    reject_count: int
    bit_count: int
    server_hash: str
    client_hashes: dict[str, str]
    converged: bool

    def to_canonical(self) -> dict:
        return {
            "seed": self.seed,
            "clients": self.clients,
            "latency_ms": self.latency_ms,
            "jitter_ms": self.jitter_ms,
            "commit_count": self.commit_count,
            "reject_count": self.reject_count,
            "bit_count": self.bit_count,
            "server_hash": self.server_hash,
            "client_hashes": dict(self.client_hashes),
            "converged": self.converged,
        }


@dataclass
class _SimClient:
    name: str
    core: ClientCore
    conn_id: str
    connected: bool = False


class SimHarness:
    """Virtual network driving one server core and scripted clients."""

    def __init__(
        self,
        latency_ms: int = 0,
        jitter_ms: int = 0,
        seed: int = 0,
        config: Optional[EngineConfig] = None,
        initial_state: Optional[SessionState] = None,
        on_commit: Optional[Callable[[Committed], None]] = None,
    ):
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms
        self.seed = seed
        self.rng = random.Random(seed)
        self.server = ServerCore(
            state=initial_state, config=config, on_commit=on_commit
        )
        self.clients: dict[str, _SimClient] = {}
        self.now = 0
        self._heap: list[tuple[int, int, Callable[[], None]]] = []
        self._counter = 0
        self._link_last: dict[tuple[str, str], int] = {}
        self._conn_serial = 0

    # -- scheduling -------------------------------------------------------

    def schedule(self, at: int, fn: Callable[[], None]) -> None:
        self._counter += 1
        heapq.heappush(self._heap, (at, self._counter, fn))

    def _delay(self) -> int:
        d = self.latency_ms
        if self.jitter_ms:
            d += self.rng.randint(-self.jitter_ms, self.jitter_ms)
        return max(0, d)

    def _deliver_at(self, link: tuple[str, str], send_t: int) -> int:
        at = max(send_t + self._delay(), self._link_last.get(link, 0))
        self._link_last[link] = at
        return at

    # -- client lifecycle -------------------------------------------------

    def add_client(self, name: str, connect_at: int = 0) -> _SimClient:
        client = _SimClient(name=name, core=ClientCore(name), conn_id="")
        self.clients[name] = client
        self.schedule(connect_at, lambda: self._connect(client))
        return client

    def _connect(self, client: _SimClient) -> None:
        self._conn_serial += 1
        client.conn_id = f"{client.name}#{self._conn_serial}"
        client.connected = True
        self.server.connect(client.conn_id)
        self._send_to_server(client, client.core.hello())

    def disconnect(self, name: str, at: int) -> None:
        def do() -> None:
            client = self.clients[name]
            if not client.connected:
                return
            client.connected = False
            outs = self.server.disconnect(client.conn_id, self.now)
            self._route_server_outputs(outs)

        self.schedule(at, do)

    def reconnect(self, name: str, at: int) -> None:
        def do() -> None:
            client = self.clients[name]
            if client.connected:
                return
            self._connect(client)
            self._send_to_server(client, client.core.resync())

        self.schedule(at, do)

    def play_script(
        self, name: str, script: list[tuple[int, dict]], start_at: int = 0
    ) -> None:
        """Schedule proposals at their at_ms offsets from start_at."""
        client = self.clients[name]
        for at_ms, payload in script:
            def send(payload=payload) -> None:
                if not client.connected:
                    return
                _, line = client.core.propose_payload(payload)
                self._send_to_server(client, line)

            self.schedule(start_at + at_ms, send)

    # -- delivery ---------------------------------------------------------

    def _send_to_server(self, client: _SimClient, line: str) -> None:
        conn_id = client.conn_id
        at = self._deliver_at((conn_id, "c2s"), self.now)

        def arrive() -> None:
            if conn_id not in self.server.conns:
                return
            outs = self.server.handle_line(conn_id, line, self.now)
            self._route_server_outputs(outs)

        self.schedule(at, arrive)

    def _route_server_outputs(self, outs: list[tuple[str, str]]) -> None:
        for conn_id, line in outs:
            at = self._deliver_at((conn_id, "s2c"), self.now)

            def arrive(conn_id=conn_id, line=line) -> None:
                client = self._client_by_conn(conn_id)
                if client is None:
                    return
                for reply in client.core.handle_line(line):
                    self._send_to_server(client, reply)

            self.schedule(at, arrive)

    def _client_by_conn(self, conn_id: str) -> Optional[_SimClient]:
        for client in self.clients.values():
            if client.connected and client.conn_id == conn_id:
                return client
        return None

    # -- run --------------------------------------------------------------

    def run(self) -> None:
        while self._heap:
            at, _, fn = heapq.heappop(self._heap)
            self.now = max(self.now, at)
            fn()

    def report(self) -> ConvergenceReport:
        server_hash = self.server.snapshot_hash()
        client_hashes = {
            name: c.core.snapshot_hash() or ""
            for name, c in sorted(self.clients.items())
            if c.connected
        }
        converged = all(h == server_hash for h in client_hashes.values())
        converged = converged and not any(
            c.core.mirror_error for c in self.clients.values() if c.connected
        )
        return ConvergenceReport(
            seed=self.seed,
            clients=len(self.clients),
            latency_ms=self.latency_ms,
            jitter_ms=self.jitter_ms,
            commit_count=self.server.commit_count,
            reject_count=self.server.reject_count,
            bit_count=len(self.server.state.bits),
            server_hash=server_hash,
            client_hashes=client_hashes,
            converged=converged,
        )


def simulate(
    scripts: list[list[tuple[int, dict]]],
    latency_ms: int = 0,
    jitter_ms: int = 0,
    seed: int = 0,
    config: Optional[EngineConfig] = None,
    initial_state: Optional[SessionState] = None,
    on_commit: Optional[Callable[[Committed], None]] = None,
) -> ConvergenceReport:
    """Run k scripted clients against an in-process server; report hashes.

    Client i is named c{i+1} and connects at t=0; all proposal times are
    offsets from t=0. The report is a pure function of (scripts, latency,
    jitter, seed).
    """
    harness = SimHarness(
        latency_ms=latency_ms,
        jitter_ms=jitter_ms,
        seed=seed,
        config=config,
        initial_state=initial_state,
        on_commit=on_commit,
    )
    for i, script in enumerate(scripts):
        name = f"c{i + 1}"
        harness.add_client(name, connect_at=0)
        harness.play_script(name, script)
    harness.run()
    return harness.report()
