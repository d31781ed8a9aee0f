"""Reference TCP client: plays an action script against a live server.

Mirrors the session from welcome + commits, checks the structural
invariants after every applied commit, and finishes with a resync to
verify its mirrored state hashes identically to the server's. Exit code 3
on any local check failure, matching the CLI contract.
"""

from __future__ import annotations

import asyncio
import json
from typing import Optional

from .. import session as session_mod
from ..scripts import Script
from .protocol import ClientCore

RESOLVE_TIMEOUT_S = 10.0
QUIESCE_GRACE_S = 0.15


class ScriptClientResult:
    def __init__(self) -> None:
        self.mirror_hash: Optional[str] = None
        self.server_hash: Optional[str] = None
        self.invariant_error: Optional[str] = None
        self.rejects: list[tuple[Optional[int], str]] = []
        self.commits_seen = 0

    @property
    def ok(self) -> bool:
        return (
            self.invariant_error is None
            and self.mirror_hash is not None
            and self.mirror_hash == self.server_hash
        )


async def run_script(
    host: str, port: int, name: str, script: Script
) -> ScriptClientResult:
    result = ScriptClientResult()
    core = ClientCore(name)

    def on_commit(committed) -> None:
        result.commits_seen += 1
        try:
            session_mod.check_state(core.state)
        except AssertionError as exc:
            result.invariant_error = f"after seq {committed.seq}: {exc}"

    core.on_commit = on_commit
    core.on_reject = lambda pid, reason: result.rejects.append((pid, reason))

    reader, writer = await asyncio.open_connection(host, port)
    welcome = asyncio.Event()
    final_check = asyncio.Event()
    awaiting_final = False

    def send(line: str) -> None:
        writer.write(line.encode("utf-8") + b"\n")

    async def read_loop() -> None:
        nonlocal awaiting_final
        while True:
            raw = await reader.readline()
            if not raw:
                break
            line = raw.decode("utf-8").rstrip("\n")
            if awaiting_final:
                try:
                    tag = json.loads(line).get("t")
                except json.JSONDecodeError:
                    tag = None
                if tag == "welcome":
                    result.mirror_hash = core.snapshot_hash()
                    for reply in core.handle_line(line):
                        send(reply)
                    result.server_hash = core.snapshot_hash()
                    final_check.set()
                    continue
            for reply in core.handle_line(line):
                send(reply)
            if core.state is not None and not welcome.is_set():
                welcome.set()

    reader_task = asyncio.create_task(read_loop())
    try:
        send(core.hello())
        await asyncio.wait_for(welcome.wait(), timeout=RESOLVE_TIMEOUT_S)
        loop = asyncio.get_running_loop()
        t0 = loop.time()
        for at_ms, payload in script:
            delay = t0 + at_ms / 1000.0 - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            _, line = core.propose_payload(payload)
            send(line)
        deadline = loop.time() + RESOLVE_TIMEOUT_S
        while core.pending and loop.time() < deadline:
            await asyncio.sleep(0.02)
        await asyncio.sleep(QUIESCE_GRACE_S)
        awaiting_final = True
        send(core.resync())
        await asyncio.wait_for(final_check.wait(), timeout=RESOLVE_TIMEOUT_S)
        if core.mirror_error and result.invariant_error is None:
            result.invariant_error = core.mirror_error
    finally:
        reader_task.cancel()
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionError, RuntimeError):
            pass
    return result
