import csv
import io
import json
import random
import shutil
import subprocess
import sys
from fractions import Fraction

import pytest

from optsample.cli import main
from optsample.ddg import LinearEncoding
from optsample.distributions import binomial, dump_distribution, load_distribution
from oracles import HALF_QUARTER_ENC, random_distribution


def write_dist(tmp_path, weights, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"weights": weights}))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_approx_exact_target(tmp_path, capsys):
    dist = write_dist(tmp_path, [3, 7])
    code, out, _ = run(capsys, "approx", "--dist", dist, "--bits", 5)
    data = json.loads(out)
    assert code == 0
    assert (data["k"], data["l"], data["Z"], data["M"], data["error"]) == (5, 1, "30", ["9", "21"], "0")
    assert data["config"]["bits"] == 5 and data["config"]["divergence"] == "tv"


def test_approx_dyadic_class(tmp_path, capsys):
    dist = write_dist(tmp_path, ["1/3", "2/3"])
    code, out, _ = run(capsys, "approx", "--dist", dist, "--bits", 3, "--class", "dyadic")
    data = json.loads(out)
    assert code == 0 and data["M"] == ["3", "5"] and data["Z"] == "8"


def test_approx_to_file_prints_summary(tmp_path, capsys):
    dist = write_dist(tmp_path, [1, 1, 1])
    target = tmp_path / "a.json"
    code, out, _ = run(capsys, "approx", "--dist", dist, "--bits", 3, "--out", target)
    assert code == 0 and out.startswith("k=3 l=")
    assert json.loads(target.read_text())["divergence"] == "tv"


def test_float_mode_output(tmp_path, capsys):
    dist = write_dist(tmp_path, [1, 2, 4])
    code, out, _ = run(capsys, "approx", "--dist", dist, "--bits", 4, "--divergence", "hellinger")
    data = json.loads(out)
    assert code == 0 and data["mode"] == "float" and "e" in data["error"]
    code, out, _ = run(capsys, "approx", "--dist", dist, "--bits", 4, "--divergence", "alpha", "--alpha", "1/2")
    assert code == 0 and json.loads(out)["divergence"] == "alpha:1/2"


def test_exact_precision(tmp_path, capsys):
    dist = write_dist(tmp_path, [3, 7])
    code, out, _ = run(capsys, "exact-precision", "--dist", dist)
    assert code == 0 and json.loads(out) == {"k": 5, "l": 1, "Z": "30"}


def test_analyze_example(tmp_path, capsys):
    enc = tmp_path / "e.json"
    enc.write_text(json.dumps({"n": 3, "k": 2, "l": 2, "enc": HALF_QUARTER_ENC}))
    code, out, _ = run(capsys, "analyze", "--encoding", enc)
    data = json.loads(out)
    assert code == 0
    assert data["output_distribution"] == ["1/2", "1/4", "1/4"]
    assert data["expected_bits"] == "3/2" and float(data["entropy"]) == 1.5


def test_compare(tmp_path, capsys):
    dist = write_dist(tmp_path, [3, 7])
    code, out, _ = run(capsys, "compare", "--dist", dist, "--bits", 2)
    rows = {r["method"]: r for r in csv.DictReader(io.StringIO(out))}
    assert code == 0
    assert rows["optimal-dyadic"]["error"] == "1/20"
    assert rows["inversion"]["error"] == "1/5"
    assert rows["rejection"]["error"] == "0"
    assert set(rows) == {"optimal-all", "optimal-dyadic", "inversion", "rejection"}


def test_sweep(tmp_path, capsys):
    a = write_dist(tmp_path, [3, 7], "a.json")
    b = write_dist(tmp_path, [1, 1, 1], "b.json")
    code, out, _ = run(capsys, "sweep", "--dist", a, "--extra-dist", b, "--divergences", "tv,hellinger",
                       "--k-min", 2, "--k-max", 4)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2 * 2 * 3
    assert {r["k"] for r in rows} == {"2", "3", "4"}


def test_gen(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "binomial", "--n", 4, "--p", "1/3")
    assert code == 0
    path = tmp_path / "b.json"
    path.write_text(out)
    assert load_distribution(path) == binomial(4, Fraction(1, 3))
    code, out, _ = run(capsys, "gen", "hypergeometric", "--population", 10, "--successes", 4, "--draws", 3)
    assert code == 0 and len(json.loads(out)["weights"]) == 4


def test_sample_stream_and_counts(tmp_path, capsys):
    dist = write_dist(tmp_path, [3, 7])
    enc = tmp_path / "e.json"
    assert run(capsys, "build", "--dist", dist, "--bits", 5, "--out", enc)[0] == 0
    code, out, _ = run(capsys, "sample", "--encoding", enc, "--seed", 3, "--num", 20)
    assert code == 0 and len(out.split()) == 20 and set(out.split()) <= {"0", "1"}
    code, out, _ = run(capsys, "sample", "--encoding", enc, "--seed", 3, "--num", 1000, "--format", "counts")
    data = json.loads(out)
    assert sum(data["counts"]) == 1000 and data["seed"] == 3 and data["bits_consumed"] > 0


def test_binary_build(tmp_path, capsys):
    dist = write_dist(tmp_path, [1, 2, 3])
    js, bn = tmp_path / "e.json", tmp_path / "e.ddg"
    assert run(capsys, "build", "--dist", dist, "--bits", 6, "--out", js)[0] == 0
    assert run(capsys, "build", "--dist", dist, "--bits", 6, "--format", "binary", "--out", bn)[0] == 0
    assert LinearEncoding.from_bytes(bn.read_bytes()) == LinearEncoding.from_json(js.read_text())
    outs = [run(capsys, "sample", "--encoding", f, "--seed", 1, "--num", 50)[1] for f in (js, bn)]
    assert outs[0] == outs[1]
    assert run(capsys, "build", "--dist", dist, "--bits", 6, "--format", "binary")[0] == 1


@pytest.mark.parametrize("div", ["tv", "pearson-chi2", "hellinger", "forward-kl"])
def test_pipeline_identity(tmp_path, capsys, div):
    rng = random.Random(61)
    for trial in range(5):
        p = random_distribution(rng, rng.randint(2, 5), 30)
        dist = tmp_path / f"p{trial}.json"
        dist.write_text(dump_distribution(p))
        approx, enc = tmp_path / "a.json", tmp_path / "e.json"
        k = rng.randint(2, 8)
        assert run(capsys, "approx", "--dist", dist, "--bits", k, "--divergence", div, "--out", approx)[0] == 0
        assert run(capsys, "build", "--approx", approx, "--out", enc)[0] == 0
        code, out, _ = run(capsys, "analyze", "--encoding", enc, "--dist", dist, "--divergence", div)
        assert code == 0
        assert json.loads(out)["error"] == json.loads(approx.read_text())["error"]


def test_determinism(tmp_path, capsys):
    dist = write_dist(tmp_path, [5, 1, 9, 2])
    outs = []
    for _ in range(2):
        enc = tmp_path / "e.json"
        run(capsys, "build", "--dist", dist, "--bits", 7, "--out", enc)
        outs.append((enc.read_bytes(),
                     run(capsys, "sample", "--encoding", enc, "--seed", 11, "--num", 10000, "--format", "counts")[1],
                     run(capsys, "approx", "--dist", dist, "--bits", 7, "--divergence", "hellinger")[1]))
    assert outs[0] == outs[1]


def test_usage_errors(tmp_path, capsys):
    dist = write_dist(tmp_path, [1, 1])
    with pytest.raises(SystemExit) as info:
        main(["approx", "--bits", "x"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 1
    assert run(capsys, "approx", "--dist", dist)[0] == 1
    assert run(capsys, "approx", "--dist", dist, "--bits", 3, "--divergence", "tv", "--alpha", "2")[0] == 1


def domain_error(capsys, *argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    payload = json.loads(err.strip().splitlines()[-1])
    assert set(payload) >= {"error", "message"}
    return payload


def test_domain_errors(tmp_path, capsys):
    good = write_dist(tmp_path, [1, 1])
    bad = tmp_path / "bad.json"
    bad.write_text("{\"weights\": [1, -1]}")
    domain_error(capsys, "approx", "--dist", bad, "--bits", 3)
    domain_error(capsys, "approx", "--dist", tmp_path / "missing.json", "--bits", 3)
    domain_error(capsys, "approx", "--dist", good, "--bits", 3, "--divergence", "kl")
    domain_error(capsys, "approx", "--dist", good, "--bits", 3, "--divergence", "hellinger", "--mode", "exact")
    junk = tmp_path / "junk.json"
    junk.write_text("not json")
    domain_error(capsys, "analyze", "--encoding", junk)
    loop = tmp_path / "loop.json"
    loop.write_text(json.dumps({"n": 1, "k": 1, "l": 0, "enc": [0, 0]}))
    domain_error(capsys, "analyze", "--encoding", loop)
    domain_error(capsys, "exact-precision", "--dist", write_dist(tmp_path, [1, 0], "d.json"))


def test_order_budget_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("OPTSAMPLE_ORDER_BUDGET", "10")
    dist = write_dist(tmp_path, [1, 101 * 103 - 1])
    payload = domain_error(capsys, "exact-precision", "--dist", dist)
    assert "budget" in payload["message"] and payload["bound"] == 10


@pytest.mark.skipif(shutil.which("optsample") is None, reason="console script not installed")
def test_console_script(tmp_path):
    dist = write_dist(tmp_path, [3, 7])
    res = subprocess.run(["optsample", "exact-precision", "--dist", dist], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["Z"] == "30"
    res = subprocess.run([sys.executable, "-m", "optsample.cli", "approx"], capture_output=True, text=True)
    assert res.returncode == 1
