import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cohten import __version__
from cohten.cli import EXIT_CHECK, EXIT_DOMAIN, EXIT_IO, EXIT_OK, dispatch
from cohten.degeneracy import DslInstance, dsl_limit_model
from cohten.io import read_cpj, write_cmx, write_cpj, write_ct3
from cohten.tensor_core import CpModel, Tensor3

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(*argv):
    return dispatch([str(a) for a in argv])


def test_version(capsys):
    assert run("--version") == EXIT_OK
    assert __version__ in capsys.readouterr().out


def test_help(capsys):
    assert run("--help") == EXIT_OK
    out = capsys.readouterr().out
    for name in ("synth", "decompose", "certify", "localize", "spark", "demo-degeneracy"):
        assert name in out


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    assert run("certify", "--bogus") == EXIT_IO
    assert "error" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert run("certify", "--model", tmp_path / "nope.cpj") == EXIT_IO


def test_certify_orthonormal(tmp_path, capsys):
    path = tmp_path / "orthonormal_r2.cpj"
    write_cpj(path, CpModel([1.0, 2.0], np.eye(2), np.eye(2), np.eye(2)))
    assert run("certify", "--model", path) == EXIT_OK
    out = capsys.readouterr().out
    assert "coherence_kruskal" in out and "FAILS" not in out


def test_certify_failure_exit(tmp_path):
    path = tmp_path / "limit.cpj"
    write_cpj(path, dsl_limit_model(DslInstance.orthonormal()))
    assert run("certify", "--model", path) == EXIT_CHECK


def test_decompose_zero_tensor(tmp_path, capsys):
    path = tmp_path / "zero.ct3"
    write_ct3(path, Tensor3.zeros((2, 2, 2)))
    assert run("decompose", "--in", path, "--rank", 1, "--out", tmp_path / "m.cpj") == EXIT_DOMAIN
    assert "zero tensor" in capsys.readouterr().err


def test_decompose_infeasible(tmp_path):
    path = tmp_path / "limit.ct3"
    from cohten.degeneracy import dsl_limit
    write_ct3(path, dsl_limit(DslInstance.orthonormal()))
    code = run("decompose", "--in", path, "--rank", 3, "--mu-caps", "0.001,0.001,0.001",
               "--max-iter", 10, "--restarts", 1, "--out", tmp_path / "m.cpj",
               "--trace", tmp_path / "t.csv")
    assert code == EXIT_CHECK
    assert (tmp_path / "t.csv").exists()
    assert not (tmp_path / "m.cpj").exists()


def test_spark_command(tmp_path, capsys):
    path = tmp_path / "x.cmx"
    s = 1 / np.sqrt(2)
    write_cmx(path, np.array([[1, 0, s], [0, 1, s]]))
    assert run("spark", "--matrix", path) == EXIT_OK
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert out["spark"] == "3" and out["krank"] == "2" and out["girth"] == "3"
    assert float(out["mu"]) == pytest.approx(s)
    assert float(out["spark_lower_bound"]) == pytest.approx(1 + np.sqrt(2))


def test_spark_capacity_is_domain_error(tmp_path):
    path = tmp_path / "big.cmx"
    write_cmx(path, np.random.default_rng(0).standard_normal((2, 30)))
    assert run("spark", "--matrix", path) == EXIT_DOMAIN


def _pipeline(workdir: Path, seed=0, snr=None):
    A, truth, model = workdir / "A.ct3", workdir / "truth.cpj", workdir / "model.cpj"
    trace, report = workdir / "trace.csv", workdir / "report.json"
    args = ["synth", "--config", SCENARIOS / "two_source.json", "--seed", seed,
            "--out", A, "--truth", truth]
    if snr is not None:
        args += ["--snr-db", snr]
    codes = [run(*args)]
    codes.append(run("decompose", "--in", A, "--rank", 2, "--seed", seed,
                     "--out", model, "--trace", trace))
    codes.append(run("certify", "--model", model))
    codes.append(run("localize", "--model", model, "--config", SCENARIOS / "two_source.json",
                     "--truth", truth, "--out", report))
    return codes, [A, truth, model, trace, report]


def test_full_pipeline(tmp_path):
    codes, files = _pipeline(tmp_path)
    assert codes == [EXIT_OK] * 4
    report = json.loads(files[-1].read_text())
    for src in report["sources"]:
        assert src["rho"] >= 0.999
        assert src["direction_error_deg"] < 0.1
    manifest = json.loads(Path(f"{files[0]}.manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["seed"] == 0
    assert set(manifest["checksums"]) == {str(files[0]), str(files[1])}


def test_pipeline_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    _, fa = _pipeline(a, seed=3, snr=25.0)
    _, fb = _pipeline(b, seed=3, snr=25.0)
    for x, y in zip(fa, fb):
        assert x.read_bytes() == y.read_bytes(), x.name


def test_model_round_trip_through_cli(tmp_path):
    _, files = _pipeline(tmp_path)
    model = read_cpj(files[2])
    again = tmp_path / "again.cpj"
    write_cpj(again, model)
    assert again.read_bytes() == files[2].read_bytes()


def test_demo_degeneracy_command(tmp_path):
    out = tmp_path / "demo.csv"
    code = run("demo-degeneracy", "--n-list", "1,10,100", "--constrained-caps", "0.79,0.79,0.79",
               "--max-iter", 100, "--restarts", 1, "--out", out)
    assert code == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0] == "n,dist_to_limit,lambda_max_explicit,mu_u,mu_v,mu_w"
    assert float(rows[2].split(",")[1]) == pytest.approx(0.173494, abs=1e-6)
    assert (tmp_path / "demo.unconstrained.trace.csv").exists()
    assert (tmp_path / "demo.constrained.trace.csv").exists()


def test_explicit_manifest_path(tmp_path):
    path = tmp_path / "m.cpj"
    write_cpj(path, CpModel([1.0], [1.0], [1.0], [1.0]))
    manifest = tmp_path / "run.json"
    assert run("certify", "--model", path, "--manifest", manifest) == EXIT_OK
    data = json.loads(manifest.read_text())
    assert data["inputs"] == [str(path)] and data["version"] == __version__


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cohten", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
