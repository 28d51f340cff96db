import json
import socket
import subprocess
import sys
import urllib.request
from importlib import resources
from pathlib import Path

import pytest

from faceopt.cli import EXIT_ABORTED, EXIT_OK, EXIT_USAGE, main
from faceopt.evaluators import external_evaluate
from faceopt.facesim import FaceSimulator
from faceopt.space import ParameterSpace
from faceopt.store import CampaignStore

TOY = str(resources.files("faceopt.data").joinpath("toy_quadratic.yaml"))
RATINGS = Path(__file__).parent / "fixtures" / "ratings"


def test_run_toy_campaign(tmp_path, capsys):
    code = main(["run", "--config", TOY, "--store", str(tmp_path)])
    assert code == EXIT_OK
    assert "happiness-seed0: complete after 30 rounds" in capsys.readouterr().out
    store = CampaignStore(tmp_path)
    assert len(store.load_records("happiness-seed0")) == 30
    assert store.manifest("happiness-seed0").status == "complete"


def test_run_refuses_to_overwrite(tmp_path, capsys):
    args = ["run", "--config", TOY, "--store", str(tmp_path), "--rounds", "12"]
    assert main(args) == EXIT_OK
    assert main(args) == EXIT_USAGE
    assert "--resume" in capsys.readouterr().err


def test_bad_config_writes_nothing(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("loop:\n  target: joy\n")
    store = tmp_path / "runs"
    assert main(["run", "--config", str(cfg), "--store", str(store)]) == EXIT_USAGE
    assert "joy" in capsys.readouterr().err
    assert not store.exists()


def test_aborted_campaign_exit_code(tmp_path, capsys):
    cfg = tmp_path / "ext.yaml"
    with socket.socket() as s:  # grab a free port, then leave it closed
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    cfg.write_text(
        "space: {lower: 0, upper: 7, groups: [[1], [2]]}\n"
        "loop: {target: fear, rounds: 5, n_init: 2}\n"
        f"evaluator: {{backend: external, endpoint: 'http://127.0.0.1:{port}/evaluate', timeout: 0.5, retries: 0}}\n"
    )
    assert main(["run", "--config", str(cfg), "--store", str(tmp_path / "runs")]) == EXIT_ABORTED
    store = CampaignStore(tmp_path / "runs")
    assert store.manifest("fear-seed0").status == "aborted"
    assert [r.status for r in store.load_records("fear-seed0")] == ["failed"]


def test_resume_finishes_campaign(tmp_path, capsys):
    runs = str(tmp_path)
    assert main(["run", "--config", TOY, "--store", runs, "--campaign-id", "c"]) == EXIT_OK
    ref = (tmp_path / "c" / "rounds.jsonl").read_text().splitlines()
    # fake an interrupted run: keep 17 rounds and mark it running again
    store = CampaignStore(tmp_path)
    (tmp_path / "c" / "rounds.jsonl").write_text("\n".join(ref[:17]) + "\n")
    store.set_status("c", "running")
    assert main(["run", "--config", TOY, "--store", runs, "--campaign-id", "c", "--resume"]) == EXIT_OK
    assert "resuming c at round 17" in capsys.readouterr().out
    got = [r.point for r in store.load_records("c")]
    assert got == [tuple(json.loads(line)["point"]) for line in ref]


def test_report_writes_csv_and_figure(tmp_path, capsys):
    main(["run", "--config", TOY, "--store", str(tmp_path), "--campaign-id", "c"])
    capsys.readouterr()
    out = tmp_path / "rep"
    assert main(["report", "--store", str(tmp_path), "--campaign-id", "c", "--out", str(out), "--table"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "best point: " in text and "round,status,objective" in text
    assert (out / "trace.csv").read_text().count("\n") == 31
    assert (out / "export.csv").read_text().startswith("campaign_id,emotion,round")
    assert (out / "trace.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_report_unknown_campaign(tmp_path, capsys):
    assert main(["report", "--store", str(tmp_path), "--campaign-id", "nope"]) == EXIT_USAGE


def test_compare_is_deterministic(tmp_path, capsys):
    args = ["compare", "--config", TOY, "--seeds", "1-3", "--budget", "15"]
    assert main(args + ["--out", str(tmp_path / "a"), "--no-figures"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(args + ["--out", str(tmp_path / "b"), "--no-figures"]) == EXIT_OK
    assert capsys.readouterr().out.replace("/b", "/a") == first
    assert (tmp_path / "a" / "compare.csv").read_text() == (tmp_path / "b" / "compare.csv").read_text()
    header, row = first.splitlines()[:2]
    assert header == "target,median_bo_final,median_random_final,bo_wins,pairs"
    assert row.startswith("happiness,") and row.endswith(",3")


def test_compare_rejects_unknown_target(capsys):
    with pytest.raises(SystemExit):
        main(["compare", "--config", TOY, "--target", "joy"])


def test_analyze_fixture(tmp_path, capsys):
    out = tmp_path / "ana"
    code = main(["analyze", str(RATINGS / "human.csv"), "--machine", str(RATINGS / "machine.csv"), "--out", str(out)])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "s1,bo,happiness,r1,0.5" in text
    assert "target,n,pearson_r,slope,intercept" in text
    assert (out / "normalized.csv").read_text().count("\n") == 13
    assert (out / "summary.csv").exists() and (out / "correlations.csv").exists()
    assert (out / "correlation.png").exists()


def test_analyze_undefined_rating(capsys):
    assert main(["analyze", str(RATINGS / "blank.csv")]) == EXIT_USAGE
    assert "s9" in capsys.readouterr().err


def test_serve_sim_round_trip():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    proc = subprocess.Popen(
        [sys.executable, "-m", "faceopt", "serve-sim", "--port", str(port)],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        line = proc.stdout.readline()
        assert f":{port}/evaluate" in line
        url = f"http://127.0.0.1:{port}/evaluate"
        space = ParameterSpace.default()
        v = space.expand(space.sample_uniform(5))
        got = external_evaluate(url, v, timeout=5.0, target="anger")
        assert got == FaceSimulator(space).scores(v)
        req = urllib.request.Request(url, data=b'{"actuators": {}}', method="POST")
        with pytest.raises(urllib.error.HTTPError) as info:
            urllib.request.urlopen(req, timeout=5)
        assert info.value.code == 400
    finally:
        proc.terminate()
        proc.wait(timeout=10)
