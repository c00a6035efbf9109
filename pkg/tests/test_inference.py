import itertools

import numpy as np
import pytest

from _nets import chain_net, fork_net, random_instance
from cdfbounds.generate import network_from_structure
from cdfbounds.inference import (
    InferenceError,
    StateSpaceTooLarge,
    ZeroProbabilityEvidence,
    brute_force_joint,
    brute_force_posterior,
    conditional_cdf_given,
    joint_posterior,
    log_evidence,
    posterior,
)
from cdfbounds.netmodel import BayesianNetwork, Cpt, Variable, cumulate


def _copy_net():
    X = Variable("X", ("x1", "x2"))
    Z = Variable("Z", ("z1", "z2"))
    return BayesianNetwork(
        (X, Z), (("X", "Z"),),
        {"X": Cpt("X", [], np.array([0.4, 0.6])), "Z": Cpt("Z", ["X"], np.eye(2))},
    )


def test_prior_is_returned_without_evidence():
    net = BayesianNetwork((Variable("Z", ("a", "b")),), (), {"Z": Cpt("Z", [], np.array([0.3, 0.7]))})
    np.testing.assert_allclose(posterior(net, "Z", {}), [0.3, 0.7])


def test_deterministic_copy():
    np.testing.assert_allclose(posterior(_copy_net(), "Z", {"X": 1}), [0.0, 1.0])


def test_zero_probability_evidence():
    # Z copies X, so X=x1 together with Z=z2 cannot happen
    net = _copy_net()
    Y = Variable("Y", ("y1", "y2"))
    net = BayesianNetwork(
        net.variables + (Y,), net.arcs + (("Z", "Y"),), {**net.cpts, "Y": Cpt("Y", ["Z"], np.full((2, 2), 0.5))}
    )
    with pytest.raises(ZeroProbabilityEvidence):
        posterior(net, "Y", {"X": 0, "Z": 1})
    with pytest.raises(ZeroProbabilityEvidence):
        brute_force_posterior(net, "Y", {"X": 0, "Z": 1})


def test_query_in_evidence_is_an_error():
    with pytest.raises(InferenceError):
        posterior(_copy_net(), "Z", {"Z": 0})


def test_fork_net_agrees_with_enumeration():
    for seed in range(10):
        net = fork_net(seed)
        for e in range(2):
            np.testing.assert_allclose(posterior(net, "Z", {"E": e}), brute_force_posterior(net, "Z", {"E": e}), atol=1e-12)


def test_elimination_order_independence():
    for seed in range(30):
        net, Z, ev = random_instance(seed, max_evidence=2)
        hidden = [n for n in net.names if n != Z and n not in ev]
        rng = np.random.default_rng(seed)
        ref = posterior(net, Z, ev)
        for _ in range(3):
            order = list(rng.permutation(hidden))
            np.testing.assert_allclose(posterior(net, Z, ev, order=order), ref, atol=1e-12)


def test_bad_order_rejected():
    net = fork_net(0)
    with pytest.raises(InferenceError):
        posterior(net, "Z", {}, order=["A"])


def test_joint_posterior_axes_follow_query_order():
    net = fork_net(1)
    j = joint_posterior(net, ["Y2", "Z"], {"E": 0})
    jt = joint_posterior(net, ["Z", "Y2"], {"E": 0})
    np.testing.assert_allclose(j, jt.T, atol=1e-12)
    np.testing.assert_allclose(j.sum(axis=0), posterior(net, "Z", {"E": 0}), atol=1e-12)


def test_chain_rule_on_three_node_chain():
    net = chain_net(2)
    joint = brute_force_joint(net)
    pxy = joint.sum(axis=2)
    px = posterior(net, "X", {})
    for x in range(net.card("X")):
        py_x = posterior(net, "Y", {"X": x})
        np.testing.assert_allclose(px[x] * py_x, pxy[x], atol=1e-12)


def test_log_evidence_matches_enumeration():
    net = fork_net(4)
    joint = brute_force_joint(net)
    p = joint[1].sum()  # E is the first variable
    assert log_evidence(net, {"E": 1}) == pytest.approx(np.log(p), abs=1e-12)


def test_underflow_guard():
    # a long chain of near-deterministic links keeps Pr(e) tiny but representable in logs
    n = 60
    names = [f"N{i}" for i in range(n)]
    cards = {k: 2 for k in names}
    arcs = list(zip(names, names[1:]))
    net = network_from_structure(0, cards, arcs)
    cpts = {names[0]: Cpt(names[0], [], np.array([1 - 1e-8, 1e-8]))}
    for u, v in arcs:
        cpts[v] = Cpt(v, [u], np.array([[1 - 1e-8, 1e-8], [1e-8, 1 - 1e-8]]))
    net = net.replace(cpts=cpts)
    ev = {k: i % 2 for i, k in enumerate(names[:-1])}
    post, logz = joint_posterior(net, [names[-1]], ev, return_log_evidence=True)
    assert np.isfinite(logz) and logz < -200 * np.log(10)
    assert post.sum() == pytest.approx(1.0)


def test_conditional_cdf_recovers_cpt_row():
    net = chain_net(5)
    for y in range(net.card("Y")):
        np.testing.assert_allclose(conditional_cdf_given(net, "Z", {"Y": y}), net.cpts["Z"].cdf[y], atol=1e-12)


def test_conditional_cdf_matches_oracle():
    net = fork_net(6)
    for y1, e in itertools.product(range(3), range(2)):
        want = cumulate(brute_force_posterior(net, "Z", {"Y1": y1, "E": e}))
        np.testing.assert_allclose(conditional_cdf_given(net, "Z", {"Y1": y1, "E": e}), want, atol=1e-9)


def test_enumeration_cap():
    with pytest.raises(StateSpaceTooLarge):
        brute_force_joint(fork_net(0), cap=10)


def test_random_agreement_small_sample():
    for seed in range(200):
        net, Z, ev = random_instance(seed + 900, monotone_fraction=0.5, max_evidence=3)
        np.testing.assert_allclose(posterior(net, Z, ev), brute_force_posterior(net, Z, ev), atol=1e-9)
