import json
import math

import pytest

from energyqrng import cli, entropy
from energyqrng.entropy import EntropyProblem, InputDistribution, LinearTarget
from energyqrng.qset import EnergyBounds


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "e, w, code",
    [(("0.9165", "-0.9165"), ("0.3", "0.3"), 0), (("1", "-1"), ("0", "0"), 1), (("1", "-1"), ("0.5", "0.5"), 0)],
)
def test_membership(capsys, e, w, code):
    rc, out, _ = run(capsys, "membership", "--e", *e, "--w", *w)
    assert rc == code
    assert "closed form" in out and "sdp" in out and "margin" in out


def test_membership_domain_error(capsys):
    rc, _, err = run(capsys, "membership", "--e", "1.5", "0", "--w", "0.1", "0.1")
    assert rc == 2
    assert "DomainError" in err


def _csv_rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [dict(zip(header, map(float, ln.split(",")))) for ln in lines[1:]]


def test_entropy_single_point_matches_library(capsys, tmp_path):
    cfg = {
        "problem": {"model": "functional", "e_minus": 0.8, "energies": {"avg": [0.3, 0.3]}},
        "algorithm": {"k": 8, "upper": False, "min_entropy": False},
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    rc, out, _ = run(capsys, "entropy", "--config", str(path))
    assert rc == 0
    header, rows = _csv_rows(out)
    assert header == ["H_k8"]
    h = entropy.entropy_lower_bound(EntropyProblem(LinearTarget(0.5, -0.5, 0.8), EnergyBounds((0.3, 0.3)), InputDistribution(), 8))[0]
    assert rows[0]["H_k8"] == pytest.approx(h, abs=1e-11)


def test_entropy_csv_header_and_stability(capsys, tmp_path):
    argv = ["entropy", "--model", "functional", "--w", "0.3", "0.3", "--param", "e_minus", "--values", "0.5", "0.8", "--k", "2", "4"]
    rc, first, _ = run(capsys, *argv)
    rc2, second, _ = run(capsys, *argv)
    assert rc == rc2 == 0
    assert first == second
    assert first.startswith("# energyqrng ")
    assert "# config-sha256 " in first
    header, rows = _csv_rows(first)
    assert header == ["e_minus", "H_k2", "H_k4", "Hmin", "H_upper"]
    assert abs(rows[0]["H_k4"]) < 1e-6 and rows[1]["H_k4"] >= rows[1]["H_k2"] > 0
    assert rows[1]["Hmin"] <= rows[1]["H_k2"] + 1e-8
    assert rows[1]["H_k4"] <= rows[1]["H_upper"] + 1e-6


def test_entropy_parallel_same_bytes(capsys, monkeypatch):
    argv = ["entropy", "--model", "functional", "--w", "0.3", "0.3", "--param", "e_minus", "--values", "0.7", "0.8", "0.9", "--k", "4", "--no-upper"]
    _, serial, _ = run(capsys, *argv)
    monkeypatch.setenv(cli.THREADS_ENV, "2")
    _, parallel, _ = run(capsys, *argv)
    assert serial == parallel


def test_entropy_ook_sweep(capsys):
    rc, out, _ = run(capsys, "entropy", "--model", "ook", "--eta", "1", "--param", "photons", "--values", "0.1", "--k", "16", "--no-upper", "--no-min-entropy")
    assert rc == 0
    _, rows = _csv_rows(out)
    assert rows[0]["H_k16"] == pytest.approx(rows[0]["H_analytic"], abs=0.02)


def test_bad_threads(capsys, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    rc, _, err = run(capsys, "entropy", "--model", "functional", "--w", "0.3", "0.3", "--e-minus", "0.7", "--k", "2")
    assert rc == 2 and cli.THREADS_ENV in err


def test_malformed_config(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"problem": {"modle": "bpsk"}, "protocol": {"n": -3}, "extra": 1}))
    rc, _, err = run(capsys, "certify", "--config", str(path))
    assert rc == 2
    assert "modle" in err and "/protocol/n" in err and "extra" in err
    path.write_text("{not json")
    rc, _, err = run(capsys, "certify", "--config", str(path))
    assert rc == 2


def test_tradeoff_json(capsys):
    rc, out, _ = run(capsys, "tradeoff", "--model", "behaviour", "--e", "0.8", "-0.8", "--w", "0.3", "0.3", "--k", "8", "--n", "1000000")
    assert rc == 0
    doc = json.loads(out)
    assert max(doc["tradeoff"]["gamma"]) <= 0
    assert doc["value"] > 0
    assert doc["threshold"] == pytest.approx(doc["value"] - 2 * doc["t"])


def test_certify_honest_and_classical(capsys, tmp_path):
    rc, out, _ = run(
        capsys, "certify", "--model", "bpsk", "--xi", "0.5", "--eta", "0.9", "--delta", "0.01", "--k", "16",
        "--n", "100000", "--seed", "4", "--out-dir", str(tmp_path), "--prefix", "honest",
    )
    assert rc == 0
    assert "decision                 pass" in out
    report = (tmp_path / "honest_report.txt").read_text()
    for key in ("threshold r", "error term t", "min-entropy budget", "key length sigma", "soundness epsilon"):
        assert key in report
    transcript = (tmp_path / "honest_transcript.csv").read_text().splitlines()
    body = [ln for ln in transcript if not ln.startswith("#")]
    assert body[0] == "round,x,a" and len(body) == 100_001
    assert (tmp_path / "honest_key.hex").exists()

    cfg = {
        "problem": {"model": "bpsk", "xi": 0.5, "eta": 0.9, "delta": 0.01},
        "algorithm": {"k": 16},
        "protocol": {
            "n": 1000000,
            "seed": 1,
            "device": {
                "kind": "ensemble",
                "weights": [0.12625, 0.12625, 0.37375, 0.37375],
                "behaviours": [[1, -1], [1, -1], [1, 1], [-1, -1]],
                "energies": [[0, 1], [1, 0], [0, 0], [0, 0]],
            },
        },
        "output": {"dir": str(tmp_path), "prefix": "classical"},
    }
    path = tmp_path / "classical.json"
    path.write_text(json.dumps(cfg))
    rc, out, _ = run(capsys, "certify", "--config", str(path))
    assert rc == 1
    assert "abort" in out


def test_bellmap(capsys):
    rc, out, _ = run(capsys, "bellmap", "--e", "0.6", "-0.6", "--w", "0.3", "0.3")
    assert rc == 0
    assert "chsh            2 -0.4" in out


def test_montecarlo(capsys):
    rc, out, _ = run(
        capsys, "montecarlo", "--model", "bpsk", "--xi", "0.5", "--eta", "0.9", "--delta", "0.01", "--k", "8",
        "--n", "10000", "--eps-t", "0.01", "--eps-omega", "0", "--trials", "1000",
    )
    assert rc == 0
    assert "violations" in out


def test_config_hash_canonical():
    a = {"problem": {"model": "ook", "xi": 0.5}}
    b = {"problem": {"xi": 0.5, "model": "ook"}}
    assert cli.config_hash(a) == cli.config_hash(b)
