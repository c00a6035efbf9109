import json

import numpy as np
import pytest

from _nets import fork_net
from cdfbounds.netmodel import (
    BayesianNetwork,
    Cpt,
    NetworkError,
    ParseError,
    ValidationError,
    Variable,
    ancestral_order_exists,
    cumulate,
    d_separated,
    is_descendant,
    network_to_dict,
    parse_evidence,
    parse_network,
    serialize_network,
    validate,
)
from cdfbounds.stochdom import Sign


def _doc(variables, arcs, cpts):
    return {
        "variables": [{"name": n, "states": s} for n, s in variables],
        "arcs": [dict(zip(("from", "to", "sign"), a)) if len(a) == 3 else {"from": a[0], "to": a[1]} for a in arcs],
        "cpts": [{"child": c, "parents": p, "rows": [{"given": g, "p": r} for g, r in rows]} for c, p, rows in cpts],
    }


CHAIN = _doc(
    [("X", ["x0", "x1"]), ("Y", ["y0", "y1"]), ("Z", ["z0", "z1"])],
    [("X", "Y"), ("Y", "Z", "+")],
    [
        ("X", [], [([], [0.4, 0.6])]),
        ("Y", ["X"], [([0], [0.7, 0.3]), ([1], [0.2, 0.8])]),
        ("Z", ["Y"], [([0], [0.9, 0.1]), ([1], [0.3, 0.7])]),
    ],
)


def test_parse_chain_net_chain():
    net = parse_network(json.dumps(CHAIN))
    assert net.names == ["X", "Y", "Z"]
    assert net.arcs == (("X", "Y"), ("Y", "Z"))
    assert net.arc_signs == {("Y", "Z"): Sign.POSITIVE}
    assert net.parents("Z") == ("Y",)


def test_parse_minimal_network():
    doc = _doc([("A", ["false", "true"])], [], [("A", [], [([], [0.5, 0.5])])])
    net = parse_network(json.dumps(doc))
    assert len(net.names) == 1
    np.testing.assert_array_equal(net.cpts["A"].table, [0.5, 0.5])


def test_row_sum_below_one_is_rejected():
    doc = _doc([("A", ["a0", "a1"])], [], [("A", [], [([], [0.5, 0.4])])])
    with pytest.raises(ValidationError) as info:
        parse_network(json.dumps(doc))
    assert [v.kind for v in info.value.report] == ["row-normalization"]


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_network('{"variables": [\n  {"name": "A",, }]}')
    assert info.value.line == 2
    assert info.value.column is not None


def test_unknown_and_duplicate_variables():
    bad = json.loads(json.dumps(CHAIN))
    bad["arcs"].append({"from": "Q", "to": "Z"})
    with pytest.raises(ParseError, match="unknown variable 'Q'"):
        parse_network(json.dumps(bad))
    dup = json.loads(json.dumps(CHAIN))
    dup["variables"].append({"name": "X", "states": ["a", "b"]})
    with pytest.raises(ParseError, match="duplicate variable"):
        parse_network(json.dumps(dup))


def test_missing_row_reported():
    doc = json.loads(json.dumps(CHAIN))
    doc["cpts"][1]["rows"].pop()
    with pytest.raises(ValidationError) as info:
        parse_network(json.dumps(doc))
    assert info.value.report[0].kind == "missing-row"


def test_round_trip():
    net = fork_net(3)
    again = parse_network(serialize_network(net))
    assert again.structurally_equal(net)
    for n in net.names:
        np.testing.assert_array_equal(again.cpts[n].table, net.cpts[n].table)
    assert network_to_dict(again) == network_to_dict(net)


def test_valid_network_has_empty_report():
    assert validate(parse_network(json.dumps(CHAIN))) == []


def test_cycle_is_reported():
    doc = _doc(
        [("A", ["a0", "a1"]), ("B", ["b0", "b1"])],
        [("A", "B"), ("B", "A")],
        [
            ("A", ["B"], [([0], [0.5, 0.5]), ([1], [0.5, 0.5])]),
            ("B", ["A"], [([0], [0.5, 0.5]), ([1], [0.5, 0.5])]),
        ],
    )
    net = parse_network(json.dumps(doc), validate_net=False)
    kinds = [v.kind for v in validate(net)]
    assert "cycle" in kinds


def test_declared_sign_contradicting_cpt():
    doc = json.loads(json.dumps(CHAIN))
    doc["arcs"][1]["sign"] = "-"  # CPT of Z puts more mass on z1 as Y grows: that is +
    net = parse_network(json.dumps(doc), validate_net=False)
    report = validate(net)
    assert [(v.kind, v.where) for v in report] == [("sign-inconsistency", "Y->Z")]


def test_unicode_minus_and_ambiguous_declarations():
    doc = json.loads(json.dumps(CHAIN))
    doc["arcs"][0]["sign"] = "?"
    doc["arcs"][1]["sign"] = "+"
    assert validate(parse_network(json.dumps(doc), validate_net=False)) == []
    assert Sign.parse("−") is Sign.NEGATIVE


def test_state_order_is_never_sorted():
    v = Variable("N", ("10", "2", "3"))
    assert v.index("10") == 0 and v.index("2") == 1


def test_evidence_parsing():
    net = fork_net(0)
    assert parse_evidence(net, "E=e1, A=a2") == {"E": 1, "A": 2}
    assert parse_evidence(net, "") == {}
    with pytest.raises(NetworkError):
        parse_evidence(net, "E")
    with pytest.raises(NetworkError):
        parse_evidence(net, "E=nope")
    with pytest.raises(NetworkError):
        parse_evidence(net, "Q=q0")


def test_cpt_cdf_matches_cumulated_rows():
    cpt = Cpt("C", ["P"], np.array([[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]]))
    np.testing.assert_allclose(cpt.cdf, [[0.2, 0.5, 1.0], [0.6, 1.0, 1.0]])
    assert cpt.cdf[0, -1] == 1.0
    with pytest.raises(ValueError):
        cpt.table[0, 0] = 0.0  # read-only


def test_cumulate_caps_at_one():
    F = cumulate(np.array([0.5, 0.5 + 1e-15, 0.0]))
    assert F.max() == 1.0 and F[-1] == 1.0


# structural queries


def _chain():
    return parse_network(json.dumps(CHAIN))


def test_is_descendant():
    net = _chain()
    assert is_descendant(net, "Z", "X")
    assert not is_descendant(net, "X", "Z")
    assert not is_descendant(net, "X", "X")
    fork = fork_net(0)
    assert not is_descendant(fork, "Y1", "Y2")
    with pytest.raises(NetworkError):
        is_descendant(net, "Q", "X")


def test_ancestral_order():
    fork = fork_net(0)
    assert ancestral_order_exists(fork, {"E"}, "A", {"Y1", "Y2"})
    # evidence downstream of A
    net = _chain()
    assert not ancestral_order_exists(net, {"Y"}, "X", set())
    with pytest.raises(NetworkError):
        ancestral_order_exists(net, {"X"}, "X", set())


def test_ancestral_order_layered():
    # E1, E2, E3 -> A -> Y, in the style of a three-evidence layered net
    from cdfbounds.generate import network_from_structure

    net = network_from_structure(
        1, {"E1": 2, "E2": 2, "E3": 2, "A": 3, "Y": 2, "Z": 2},
        [("E1", "A"), ("E2", "A"), ("E3", "A"), ("A", "Y"), ("Y", "Z")],
    )
    assert ancestral_order_exists(net, {"E1", "E2", "E3"}, "A", {"Y"})


def test_ancestral_order_monotone_under_removal():
    fork = fork_net(0)
    assert ancestral_order_exists(fork, set(), "A", {"Y1"})
    assert ancestral_order_exists(fork, {"E"}, "A", set())


def test_d_separation():
    net = _chain()
    assert d_separated(net, "Z", "X", {"Y"})
    assert not d_separated(net, "Z", "X", set())
    from cdfbounds.generate import network_from_structure

    collider = network_from_structure(0, {"A": 2, "B": 2, "C": 2}, [("A", "C"), ("B", "C")])
    assert d_separated(collider, "A", "B", set())
    assert not d_separated(collider, "A", "B", {"C"})
    assert d_separated(fork_net(0), "Z", "A", {"E", "Y1", "Y2"})


def test_network_helpers():
    net = fork_net(0)
    assert net.children("A") == ["Y1", "Y2"]
    assert net.descendants("A") == {"Y1", "Y2", "Z"}
    assert net.ancestors("Z") == {"E", "A", "Y1", "Y2"}
    assert net.joint_size() == 2 * 4 * 3 * 3 * 3
    assert isinstance(net, BayesianNetwork)
