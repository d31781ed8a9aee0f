import json
import signal
import socket
import subprocess
import sys

import pytest

from docubits import demo
from docubits.cli import main
from docubits.net.simulate import SimHarness
from docubits.persist import EventLogWriter, load_snapshot
from docubits.scripts import load_script_dir
from docubits.session import snapshot_hash


@pytest.fixture
def demo_doc(tmp_path):
    path = tmp_path / "doc.txt"
    path.write_text(demo.document_text(), encoding="utf-8")
    return path


@pytest.fixture
def session_log(tmp_path):
    log_path = tmp_path / "session.jsonl"
    writer = EventLogWriter(log_path)
    harness = SimHarness(latency_ms=20, jitter_ms=10, seed=1234, on_commit=writer.append)
    for i, script in enumerate(load_script_dir(demo.script_dir(), clients=2)):
        harness.add_client(f"c{i + 1}", connect_at=0)
        harness.play_script(f"c{i + 1}", script)
    harness.run()
    writer.close()
    return log_path, harness.server.state


class TestSegment:
    def test_steps_mode(self, demo_doc, capsys):
        assert main(["segment", str(demo_doc), "--mode", "steps"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out) == 8
        assert out[0]["ordinal"] == 1
        assert out[0]["text"].startswith("1. Put on gloves")

    def test_steps_mode_no_headers(self, tmp_path, capsys):
        path = tmp_path / "prose.txt"
        path.write_text("no numbered lines here")
        assert main(["segment", str(path)]) == 2
        assert "NoSteps" in capsys.readouterr().err

    def test_highlight_mode(self, demo_doc, capsys):
        assert main([
            "segment", str(demo_doc), "--mode", "highlight", "--spans", "0:7,36:51",
        ]) == 0
        out = json.loads(capsys.readouterr().out)
        assert [seg["text"] for seg in out] == ["Cooling", "Read everything"]

    def test_highlight_overlap_fails(self, demo_doc, capsys):
        assert main([
            "segment", str(demo_doc), "--mode", "highlight", "--spans", "0:7,3:9",
        ]) == 2
        assert "Overlaps" in capsys.readouterr().err

    def test_cohesion_sidecar(self, demo_doc, tmp_path, capsys):
        sidecar = tmp_path / "cohesion.json"
        sidecar.write_text("[[1,2],[3],[4,5,6],[7,8]]")
        assert main(["segment", str(demo_doc), "--cohesion", str(sidecar)]) == 0
        sidecar.write_text("[[7,8,9]]")
        assert main(["segment", str(demo_doc), "--cohesion", str(sidecar)]) == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["segment", str(tmp_path / "nope.txt")]) == 2


class TestReplay:
    def test_hash_output(self, session_log, capsys):
        log_path, state = session_log
        assert main(["replay", str(log_path), "--hash"]) == 0
        assert capsys.readouterr().out.strip() == snapshot_hash(state)

    def test_full_state_output(self, session_log, capsys):
        log_path, state = session_log
        assert main(["replay", str(log_path)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["last_seq"] == state.last_seq

    def test_gap_exits_3(self, session_log, tmp_path, capsys):
        log_path, _ = session_log
        lines = log_path.read_text().splitlines()
        gapped = tmp_path / "gapped.jsonl"
        gapped.write_text("\n".join(lines[:2] + lines[3:]) + "\n")
        assert main(["replay", str(gapped)]) == 3

    def test_snapshot_out_round_trip(self, session_log, tmp_path, capsys):
        log_path, state = session_log
        snap = tmp_path / "out.json"
        assert main(["replay", str(log_path), "--hash", "--snapshot-out", str(snap)]) == 0
        assert snapshot_hash(load_snapshot(snap)) == snapshot_hash(state)


class TestMetrics:
    def test_json_format(self, session_log, capsys):
        log_path, _ = session_log
        assert main(["metrics", str(log_path), "--format", "json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["distribution_gap"] == 1
        totals = sorted(
            u["total_completed"] for u in report["per_user"].values()
        )
        assert totals == [1, 2]

    def test_csv_format(self, session_log, capsys):
        log_path, _ = session_log
        assert main(["metrics", str(log_path), "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("user,")
        assert lines[-1].startswith("summary,2,1,3,1,")

    def test_figures_written(self, session_log, tmp_path, capsys):
        log_path, _ = session_log
        figdir = tmp_path / "figs"
        assert main(["metrics", str(log_path), "--figures", str(figdir)]) == 0
        assert (figdir / "task_distribution.png").exists()
        assert (figdir / "completion_times.png").exists()


class TestSimulate:
    def test_generated_run_converges(self, capsys):
        code = main([
            "simulate", "--clients", "2", "--generate", "120",
            "--latency-ms", "100", "--jitter-ms", "100", "--seed", "42",
        ])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["converged"] is True

    def test_stdout_bytes_reproducible(self, capsys):
        args = [
            "simulate", "--clients", "3", "--generate", "90",
            "--latency-ms", "50", "--jitter-ms", "50", "--seed", "7",
        ]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_bundled_scripts(self, capsys):
        code = main([
            "simulate", "--clients", "2", "--script-dir", str(demo.script_dir()),
            "--latency-ms", "20", "--jitter-ms", "10", "--seed", "42",
        ])
        assert code == 0

    def test_requires_script_source(self, capsys):
        assert main(["simulate", "--clients", "2"]) == 1


class TestUsage:
    def test_bad_connect_string(self, tmp_path, capsys):
        script = tmp_path / "s.jsonl"
        script.write_text('{"at_ms":0,"event":{"t":"join","name":"x"}}\n')
        assert main(["client", "--connect", "nope", "--name", "x",
                     "--script", str(script)]) == 1

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1


def _spawn_serve(*extra):
    proc = subprocess.Popen(
        [sys.executable, "-m", "docubits.cli", "serve", "--port", "0",
         "--ws-port", "0", *extra],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    line = proc.stdout.readline()
    assert line.startswith("listening"), (line, proc.stderr.read())
    parts = dict(kv.split("=") for kv in line.strip().split()[1:])
    return proc, int(parts["tcp"]), int(parts["ws"])


def _start_client(port, name, script):
    return subprocess.Popen(
        [sys.executable, "-m", "docubits.cli", "client",
         "--connect", f"127.0.0.1:{port}", "--name", name, "--script", str(script)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )


class TestServeEndToEnd:
    def test_full_session_log_snapshot_restart(self, tmp_path):
        log_path = tmp_path / "live.jsonl"
        snap_path = tmp_path / "final.json"
        proc, tcp_port, ws_port = _spawn_serve(
            "--log", str(log_path), "--snapshot-out", str(snap_path),
        )
        try:
            scripts = sorted(demo.script_dir().glob("*.jsonl"))
            procs = [
                _start_client(tcp_port, name, path)
                for name, path in zip(("ada", "ben"), scripts)
            ]
            clients = [(p.returncode, *p.communicate(timeout=60)) for p in procs]
        finally:
            proc.send_signal(signal.SIGTERM)
            out, err = proc.communicate(timeout=10)
        assert proc.returncode == 0, (out, err)
        for p, (_, stdout, stderr) in zip(procs, clients):
            assert p.returncode == 0, (stdout, stderr)
        # ben saw his claim of the completed bit rejected
        assert "AlreadyCompleted" in clients[1][1]

        # the log replays to the snapshot the server wrote at shutdown
        replay = subprocess.run(
            [sys.executable, "-m", "docubits.cli", "replay", str(log_path), "--hash"],
            capture_output=True, text=True, timeout=30,
        )
        assert replay.returncode == 0
        assert replay.stdout.strip() == snapshot_hash(load_snapshot(snap_path))

        # restart from the snapshot: a fresh client sees the placed layout
        proc2, tcp2, _ = _spawn_serve("--snapshot", str(snap_path))
        try:
            with socket.create_connection(("127.0.0.1", tcp2), timeout=5) as sock:
                sock.sendall(b'{"t":"hello","v":1,"name":"late"}\n')
                fh = sock.makefile("r", encoding="utf-8")
                welcome = json.loads(fh.readline())
            placements = {
                bid: bit["placement"]["kind"]
                for bid, bit in welcome["snapshot"]["bits"].items()
            }
            assert placements["b1"] == "placed"
            assert placements["b3"] == "placed"
        finally:
            proc2.send_signal(signal.SIGTERM)
            proc2.communicate(timeout=10)
        assert proc2.returncode == 0

    def test_bind_failure_exits_2(self):
        blocker = socket.socket()
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            proc = subprocess.run(
                [sys.executable, "-m", "docubits.cli", "serve", "--port", str(port)],
                capture_output=True, text=True, timeout=20,
            )
            assert proc.returncode == 2
            assert "cannot bind" in proc.stderr
        finally:
            blocker.close()
