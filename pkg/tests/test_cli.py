import json
import subprocess
import sys

import numpy as np
import pytest

from _nets import chain_net, fork_net
from cdfbounds.cli import main
from cdfbounds.generate import network_from_structure
from cdfbounds.inference import brute_force_posterior
from cdfbounds.netmodel import Cpt, cumulate, load_network, serialize_network
from cdfbounds.stochdom import Sign
from cdfbounds.traceio import parse_trace


def write(tmp_path, net, name="net.json"):
    path = tmp_path / name
    path.write_text(serialize_network(net))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def lines(out):
    return [json.loads(ln) for ln in out.splitlines() if ln.strip()]


def test_validate_ok(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "--network", write(tmp_path, fork_net(0)))
    assert code == 0 and json.loads(out) == {"valid": True, "violations": []}


def test_validate_cycle(tmp_path, capsys):
    doc = {
        "variables": [{"name": "A", "states": ["a", "b"]}, {"name": "B", "states": ["a", "b"]}],
        "arcs": [{"from": "A", "to": "B"}, {"from": "B", "to": "A"}],
        "cpts": [
            {"child": "A", "parents": ["B"], "rows": [{"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}]},
            {"child": "B", "parents": ["A"], "rows": [{"given": [0], "p": [0.5, 0.5]}, {"given": [1], "p": [0.5, 0.5]}]},
        ],
    }
    path = tmp_path / "cyc.json"
    path.write_text(json.dumps(doc))
    code, out, err = run(capsys, "validate", "--network", str(path))
    assert code == 1
    rep = json.loads(out)
    cyc = [v for v in rep["violations"] if v["kind"] == "cycle"]
    assert not rep["valid"] and cyc
    assert "A -> B" in json.dumps(cyc[0])


def test_validate_sign_mismatch(tmp_path, capsys):
    net = chain_net(0)
    net = net.replace(arc_signs={**net.arc_signs, ("Y", "Z"): Sign.NEGATIVE})
    code, out, err = run(capsys, "validate", "--network", write(tmp_path, net))
    assert code == 1
    bad = [v for v in json.loads(out)["violations"] if v["kind"] == "sign-inconsistency"]
    assert bad and "Y" in bad[0]["where"] and "Z" in bad[0]["where"]


def test_signs_chain_net(tmp_path, capsys):
    code, out, _ = run(capsys, "signs", "--network", write(tmp_path, chain_net(0)), "--query", "Z", "--evidence", "X=x0")
    assert code == 0
    doc = json.loads(out)
    yz = next(a for a in doc["arcs"] if (a["from"], a["to"]) == ("Y", "Z"))
    assert yz["sign"] == "+"
    assert "Y" in doc["selected"]


def test_signs_uniform_and_mixed(tmp_path, capsys):
    net = chain_net(0)
    flat = {n: Cpt(n, c.parents, np.full(c.table.shape, 1.0 / c.table.shape[-1])) for n, c in net.cpts.items()}
    code, out, _ = run(capsys, "signs", "--network", write(tmp_path, net.replace(cpts=flat, arc_signs={})))
    assert {a["sign"] for a in json.loads(out)["arcs"]} == {"0"}
    t = np.array([[0.1, 0.6, 0.3], [0.3, 0.2, 0.5], [0.2, 0.2, 0.6], [0.1, 0.1, 0.8]])
    mixed = net.replace(cpts={**net.cpts, "Z": Cpt("Z", ["Y"], t)}, arc_signs={})
    code, out, _ = run(capsys, "signs", "--network", write(tmp_path, mixed, "m.json"))
    amb = [a for a in json.loads(out)["arcs"] if a["sign"] == "?"]
    assert amb and "numeric fallback" in amb[0]["note"]


def test_query(tmp_path, capsys):
    net = fork_net(0)
    code, out, _ = run(capsys, "query", "--network", write(tmp_path, net), "--query", "Z", "--evidence", "E=e1")
    doc = json.loads(out)
    np.testing.assert_allclose(doc["pmf"], brute_force_posterior(net, "Z", {"E": 1}), atol=1e-12)


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_bound_converges(tmp_path, capsys, fmt):
    net = fork_net(0)
    code, out, err = run(capsys, "bound", "--network", write(tmp_path, net), "--query", "Z",
                         "--evidence", "E=e0", "--format", fmt)
    assert code == 0
    trace = parse_trace(out, states=net.var("Z").states) if fmt == "csv" else parse_trace(out)
    exact = cumulate(brute_force_posterior(net, "Z", {"E": 0}))
    assert trace.check() == []
    np.testing.assert_allclose(trace.final.lower, exact, atol=1e-9)
    np.testing.assert_allclose(trace.final.upper, exact, atol=1e-9)
    summary = json.loads(err.strip().splitlines()[-1]) if fmt == "csv" else lines(out)[-1]
    assert summary["converged"] and len(summary["intervals"]) == net.card("Z")


def test_bound_one_iteration(tmp_path, capsys):
    code, out, _ = run(capsys, "bound", "--network", write(tmp_path, fork_net(0)), "--query", "Z",
                       "--max-iterations", "1", "--format", "csv")
    rows = out.strip().splitlines()
    assert rows[0] == "iteration,bound,state_index,cdf_value,wall_ms"
    assert {r.split(",")[0] for r in rows[1:]} == {"0"}
    assert len(rows) == 1 + 2 * 3


def test_bound_fallback_and_values(tmp_path, capsys):
    net = network_from_structure(0, {"X": 3, "Z": 3}, [])
    vals = tmp_path / "v.json"
    vals.write_text(json.dumps({"z0": 0, "z1": 1, "z2": 5}))
    code, out, _ = run(capsys, "bound", "--network", write(tmp_path, net), "--query", "Z", "--values", str(vals))
    recs = lines(out)
    its = [r for r in recs if r["type"] == "iteration"]
    assert len(its) == 1 and its[0]["exact_fallback"]
    summary = recs[-1]
    assert summary["exact_fallback"]
    lo, hi = summary["expected_value"]
    assert lo == pytest.approx(hi)


def test_bound_impossible_evidence(tmp_path, capsys):
    net = chain_net(0)
    t = np.zeros((3, 4))
    t[:, 0] = 1.0
    net = net.replace(cpts={**net.cpts, "Y": Cpt("Y", ["X"], t)}, arc_signs={})
    code, out, _ = run(capsys, "bound", "--network", write(tmp_path, net), "--query", "Z", "--evidence", "Y=y2")
    assert code == 2 and out == ""


def test_bound_plot(tmp_path, capsys):
    fig = tmp_path / "trace.png"
    code, *_ = run(capsys, "bound", "--network", write(tmp_path, fork_net(0)), "--query", "Z", "--plot", str(fig))
    assert code == 0 and fig.stat().st_size > 1000


def _utility(tmp_path, fn, m=3):
    from cdfbounds.decision import UtilityTable

    path = tmp_path / "u.json"
    path.write_text(json.dumps(UtilityTable.from_function(range(m), range(m), fn).to_dict()))
    return str(path)


def test_decide_nested(tmp_path, capsys):
    net = fork_net(1)
    u = _utility(tmp_path, lambda d, x: -((d - x) ** 2))
    code, out, _ = run(capsys, "decide", "--network", write(tmp_path, net), "--query", "Z",
                       "--evidence", "E=e1", "--utility", u, "--no-early-stop")
    assert code == 0
    recs = lines(out)
    sets = [(r["admissible"]["lo"], r["admissible"]["hi"]) for r in recs if r["type"] == "decision"]
    for (a, b), (c, d) in zip(sets, sets[1:]):
        assert a <= c and d <= b
    summary = recs[-1]
    assert summary["converged"]
    lo, hi = sets[-1]
    assert summary["optimal"] == list(range(lo, hi + 1))


def test_decide_not_supermodular(tmp_path, capsys):
    u = _utility(tmp_path, lambda d, x: -d * x)
    code, out, _ = run(capsys, "decide", "--network", write(tmp_path, fork_net(0)), "--query", "Z", "--utility", u)
    assert code == 3
    doc = json.loads(out)
    assert doc["error"] == "not-supermodular" and len(doc["witness"]) == 4


def test_generate(tmp_path, capsys):
    _, a, _ = run(capsys, "generate", "--seed", "1")
    _, b, _ = run(capsys, "generate", "--seed", "1")
    assert a == b
    path = tmp_path / "g.json"
    path.write_text(a)
    code, *_ = run(capsys, "validate", "--network", str(path))
    assert code == 0
    _, c, _ = run(capsys, "generate", "--seed", "7", "--nodes", "6", "--monotone-fraction", "1.0", "--no-declare")
    path.write_text(c)
    _, out, _ = run(capsys, "signs", "--network", str(path))
    assert all(a["sign"] in ("+", "-") for a in json.loads(out)["arcs"])


@pytest.mark.parametrize("argv", [
    [],
    ["bound"],
    ["bound", "--network", "missing.json", "--query", "Z"],
    ["bound", "--network", "NET", "--query", "Nope"],
    ["bound", "--network", "NET", "--query", "Z", "--evidence", "E=zz"],
    ["bound", "--network", "NET", "--query", "Z", "--max-iterations", "0"],
    ["generate", "--seed", "1", "--monotone-fraction", "2"],
])
def test_usage_errors(tmp_path, capsys, argv):
    net = write(tmp_path, fork_net(0))
    argv = [net if a == "NET" else a for a in argv]
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == 64


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "cdfbounds", "validate", "--network", write(tmp_path, fork_net(0))],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["valid"]
