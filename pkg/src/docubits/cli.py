"""Operator entry points.

    docubits serve    --port 7000 [--ws-port 7001] [--snapshot F] [--log F] ...
    docubits client   --connect HOST:PORT --name N --script F
    docubits segment  FILE --mode steps|highlight [--spans a:b,c:d] [--cohesion F]
    docubits replay   LOG [--hash] [--snapshot F] [--snapshot-out F]
    docubits metrics  LOG --format json|csv [--figures DIR]
    docubits simulate --clients K (--script-dir D | --generate N) --seed S ...

Exit codes: 0 ok, 1 usage, 2 I/O or protocol, 3 invariant/convergence
failure. All randomness sits behind a seed and every run prints the seed it
used, so identical flags give identical stdout bytes.
"""

from __future__ import annotations

import argparse
import asyncio
import signal
import sys
from pathlib import Path

from .canonical import canonical_json
from .config import EngineConfig, load_config
from .document import SourceDocument, load_cohesion_sidecar, parse_steps, segment_by_highlight
from .errors import CorruptLog, IoFailure, PersistError, Rejected, VersionMismatch
from .metrics import compute_metrics, render_figures
from .net.client import run_script
from .net.server import serve_forever
from .net.simulate import simulate
from .persist import load_snapshot, read_log, replay_file, save_snapshot
from .scripts import generate_scripts, load_script, load_script_dir
from .spatial import Frustum

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INVARIANT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="docubits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the authoritative session server")
    p.add_argument("--port", type=int, required=True, help="TCP (NDJSON) port")
    p.add_argument("--ws-port", type=int, default=None,
                   help="WebSocket + dashboard HTTP port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--snapshot", help="restore state from a snapshot file")
    p.add_argument("--log", help="append committed events to this JSON-lines file")
    p.add_argument("--config", help="JSON config (frustum, animation, palette)")
    p.add_argument("--snapshot-out", help="write a snapshot here on shutdown")
    p.add_argument("--static-dir", help="dashboard assets served on --ws-port")
    p.add_argument("--fov-h", type=float, help="horizontal FOV override, degrees")
    p.add_argument("--fov-v", type=float, help="vertical FOV override, degrees")
    p.add_argument("--near", type=float, help="frustum near plane, meters")
    p.add_argument("--far", type=float, help="frustum far plane, meters")

    p = sub.add_parser("client", help="play an action script against a server")
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--name", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--seed", type=int, default=0,
                   help="reserved for scripted randomness; echoed for reproducibility")

    p = sub.add_parser("segment", help="fragment a document file, print JSON segments")
    p.add_argument("file")
    p.add_argument("--mode", choices=["steps", "highlight"], default="steps")
    p.add_argument("--spans", help="highlight byte spans a:b[,c:d...]")
    p.add_argument("--cohesion", help="cohesion sidecar JSON (validated against steps)")

    p = sub.add_parser("replay", help="rebuild state from an event log")
    p.add_argument("log")
    p.add_argument("--hash", action="store_true", help="print only the state hash")
    p.add_argument("--snapshot", help="start from this snapshot instead of empty")
    p.add_argument("--snapshot-out", help="write the final state as a snapshot")

    p = sub.add_parser("metrics", help="collaboration measures from an event log")
    p.add_argument("log")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--figures", metavar="DIR",
                   help="also render matplotlib figures into DIR")

    p = sub.add_parser("simulate", help="latency-simulated multi-client run")
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--script-dir", help="directory of *.jsonl action scripts")
    p.add_argument("--generate", type=int, metavar="N",
                   help="generate N seeded proposals instead of --script-dir")
    p.add_argument("--latency-ms", type=int, default=0)
    p.add_argument("--jitter-ms", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _load_engine_config(args) -> EngineConfig:
    cfg = load_config(args.config) if args.config else EngineConfig()
    f = cfg.frustum
    if any(v is not None for v in (args.fov_h, args.fov_v, args.near, args.far)):
        cfg.frustum = Frustum(
            h_fov_deg=args.fov_h if args.fov_h is not None else f.h_fov_deg,
            v_fov_deg=args.fov_v if args.fov_v is not None else f.v_fov_deg,
            near=args.near if args.near is not None else f.near,
            far=args.far if args.far is not None else f.far,
        )
    return cfg


def cmd_serve(args) -> int:
    try:
        config = _load_engine_config(args)
        initial = load_snapshot(args.snapshot) if args.snapshot else None
    except (OSError, ValueError, PersistError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    async def main() -> int:
        shutdown = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, shutdown.set)

        def announce(server) -> None:
            print(f"listening tcp={server.tcp_port} ws={server.ws_port}", flush=True)

        try:
            await serve_forever(
                host=args.host,
                tcp_port=args.port,
                ws_port=args.ws_port,
                config=config,
                initial_state=initial,
                log_path=args.log,
                snapshot_out=args.snapshot_out,
                static_dir=args.static_dir,
                on_ready=announce,
                shutdown=shutdown,
            )
        except IoFailure as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        return EXIT_OK

    return asyncio.run(main())


def cmd_client(args) -> int:
    host, _, port_str = args.connect.rpartition(":")
    if not host or not port_str.isdigit():
        print("error: --connect must be HOST:PORT", file=sys.stderr)
        return EXIT_USAGE
    try:
        script = load_script(args.script)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"seed {args.seed}")
    try:
        result = asyncio.run(run_script(host, int(port_str), args.name, script))
    except (OSError, asyncio.TimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for pid, reason in result.rejects:
        print(f"reject pid={pid} reason={reason}")
    print(f"commits {result.commits_seen}")
    print(f"hash {result.mirror_hash}")
    if not result.ok:
        if result.invariant_error:
            print(f"invariant violation: {result.invariant_error}", file=sys.stderr)
        else:
            print(
                f"mirror diverged: {result.mirror_hash} != {result.server_hash}",
                file=sys.stderr,
            )
        return EXIT_INVARIANT
    return EXIT_OK


def _parse_spans(raw: str) -> list[tuple[int, int]]:
    spans = []
    for part in raw.split(","):
        a, _, b = part.partition(":")
        spans.append((int(a), int(b)))
    return spans


def cmd_segment(args) -> int:
    try:
        body = Path(args.file).read_text(encoding="utf-8")
        cohesion = load_cohesion_sidecar(args.cohesion) if args.cohesion else None
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        doc = SourceDocument(
            doc_id=Path(args.file).name, title=Path(args.file).stem,
            body=body, cohesion=cohesion,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.mode == "steps":
            segments = parse_steps(doc)
            if cohesion is not None:
                known = {seg.ordinal for seg in segments}
                missing = [o for g in cohesion for o in g if o not in known]
                if missing:
                    print(f"error: cohesion names unknown steps {missing}", file=sys.stderr)
                    return EXIT_IO
            out = [
                {"ordinal": seg.ordinal, "span": list(seg.span), "text": seg.text}
                for seg in segments
            ]
        else:
            if not args.spans:
                print("error: --mode highlight requires --spans", file=sys.stderr)
                return EXIT_USAGE
            try:
                spans = _parse_spans(args.spans)
            except ValueError:
                print("error: --spans must be a:b[,c:d...]", file=sys.stderr)
                return EXIT_USAGE
            existing: list[tuple[int, int]] = []
            out = []
            for raw_span in spans:
                seg = segment_by_highlight(doc, raw_span, existing, creator="cli")
                existing.append(seg.span)
                out.append({"span": list(seg.span), "text": seg.text})
    except Rejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(canonical_json(out))
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        initial = load_snapshot(args.snapshot) if args.snapshot else None
        state = replay_file(args.log, initial=initial)
    except (IoFailure, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CorruptLog as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    from .session import snapshot_hash, to_canonical

    if args.snapshot_out:
        save_snapshot(state, args.snapshot_out)
    if args.hash:
        print(snapshot_hash(state))
    else:
        print(canonical_json(to_canonical(state)))
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        events = read_log(args.log)
        report = compute_metrics(events)
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CorruptLog as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    if args.format == "json":
        print(report.to_json())
    else:
        sys.stdout.write(report.to_csv())
    if args.figures:
        for path in render_figures(report, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.clients < 1:
        print("error: --clients must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if (args.script_dir is None) == (args.generate is None):
        print("error: need exactly one of --script-dir or --generate", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.script_dir:
            scripts = load_script_dir(args.script_dir, args.clients)
        else:
            scripts = generate_scripts(args.seed, args.clients, args.generate)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = simulate(
        scripts,
        latency_ms=args.latency_ms,
        jitter_ms=args.jitter_ms,
        seed=args.seed,
    )
    print(canonical_json(report.to_canonical()))
    return EXIT_OK if report.converged else EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "serve": cmd_serve,
        "client": cmd_client,
        "segment": cmd_segment,
        "replay": cmd_replay,
        "metrics": cmd_metrics,
        "simulate": cmd_simulate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
