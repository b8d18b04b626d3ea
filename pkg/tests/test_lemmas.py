from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hyperreg.lemmas import (NestedEquivalence, TestFunctional, check_counting_error_bound,
                             check_mean_square_bound, check_nested_cauchy_schwarz,
                             counting_instance, doubled_complex, load_corpus,
                             mean_square_instance, random_functional, random_nested, run_corpus)
from hyperreg.model import (Edge, ValidationError, complex_from_edges, constant_hypergraph,
                            embedded_complex, random_hypergraph, validate_complex)
from hyperreg.regularity import ErrorFunction

import oracles


# -- nested conditional expectations -----------------------------------------

def test_identical_relations_margin_zero():
    inst = NestedEquivalence([0, 0, 1, 1], [0, 0, 1, 1], [1, 2, 3, 5])
    assert check_nested_cauchy_schwarz(inst).margin == 0


def test_constant_variable_margin_zero():
    inst = NestedEquivalence([0, 1, 2, 3], [0, 0, 0, 0], [Fraction(2, 3)] * 4)
    assert check_nested_cauchy_schwarz(inst).margin == 0


def test_hand_cases():
    pairs, one = [0, 0, 1, 1], [0, 0, 0, 0]
    res = check_nested_cauchy_schwarz(NestedEquivalence(pairs, one, [0, 1, 0, 1]))
    assert (res.lhs, res.rhs, res.margin) == (Fraction(1, 4), Fraction(1, 4), 0)
    res = check_nested_cauchy_schwarz(NestedEquivalence(pairs, one, [0, 0, 1, 1]))
    assert (res.lhs, res.rhs, res.margin) == (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))


def test_refinement_is_enforced():
    with pytest.raises(ValidationError):
        NestedEquivalence([0, 0, 1], [0, 1, 1], [1, 2, 3])


@given(st.integers(0, 10 ** 6))
def test_nested_margin_matches_oracle_and_is_sign_invariant(seed):
    inst = random_nested(seed)
    res = check_nested_cauchy_schwarz(inst)
    assert (res.lhs, res.rhs) == oracles.nested_sides(inst.fine, inst.coarse, inst.X)
    assert res.margin >= 0
    neg = NestedEquivalence(inst.fine, inst.coarse, [-x for x in inst.X])
    assert check_nested_cauchy_schwarz(neg).margin == res.margin


# -- counting error ----------------------------------------------------------

def test_single_full_edge_has_zero_lhs():
    G = random_hypergraph(2, 2, [2, 2], [3, 3], seed=1)
    S = embedded_complex(G, 1, 1, p_visible=1.0)
    res = check_counting_error_bound(G, S)
    assert res.lhs == 0 and res.holds


def test_no_full_edges_both_sides_zero():
    G = random_hypergraph(2, 2, [2, 2], [3, 3], seed=1)
    S = complex_from_edges(2, 2, 2, {Edge((0,), (0,)): 0})
    res = check_counting_error_bound(G, S)
    assert (res.lhs, res.rhs) == (0, 0)


def test_empty_condition_is_skipped():
    G = constant_hypergraph(2, 2, [2, 2], b=(2, 2))
    S = complex_from_edges(2, 2, 1, {Edge((0,), (0,)): 1, Edge((1,), (0,)): 0,
                                     Edge((0, 1), (0, 0)): 0})
    res = check_counting_error_bound(G, S)
    assert res.skipped and res.holds


@given(st.integers(0, 10 ** 6), st.integers(1, 2))
def test_counting_bound_matches_oracle(seed, h):
    G = random_hypergraph(2, 2, [2, 2], [2, 2], seed)
    S = embedded_complex(G, h, seed)
    res = check_counting_error_bound(G, S)
    want = oracles.counting_sides(G, S)
    assert want is not None
    assert (res.lhs, res.rhs) == want
    assert res.lhs <= res.rhs


# -- mean square bound --------------------------------------------------------

def test_zero_functional_gives_zero_lhs():
    G, S, _ = mean_square_instance({"r": 2, "k": 2, "b": [2, 2], "parts": [2, 2], "h": 1,
                                    "seed": 3, "m": 1, "p_visible": 1.0})
    res = check_mean_square_bound(G, S, TestFunctional.zero(G, S), 1, ErrorFunction.constant(0))
    assert res.lhs == 0 and res.holds


@pytest.mark.parametrize("m", [1, 2])
def test_monochrome_reduces_to_m_term(m):
    G = constant_hypergraph(2, 2, [2, 2], b=(1, 2))
    e0 = Edge((0, 1), (0, 0))
    S = complex_from_edges(2, 2, 1, {Edge((0,), (0,)): 0, Edge((1,), (0,)): 0, e0: 0})
    f = Fraction(3, 4)
    F = TestFunctional({e0: (f, Fraction(-1))})
    res = check_mean_square_bound(G, S, F, m, ErrorFunction.constant(0))
    assert res.lhs == f * f
    assert res.extra["q"] == f * f
    assert res.extra["p_double"] == 1 and res.extra["p_low"] == 1
    assert res.rhs == res.extra["rhs_chain"] == f * f * (1 + Fraction(1, m))
    assert res.holds and res.extra["guard"]


def test_doubled_complex_shape():
    G = random_hypergraph(2, 2, [2, 2], [2, 2], seed=2)
    S = embedded_complex(G, 2, 2, p_visible=1.0)
    e0 = S.visible(2)[0]
    D = doubled_complex(S, e0, 2)
    assert D.h == 4 and D.s == 1
    assert len(D.visible_edges) == 2 * len(S.visible(1)) - 2
    assert validate_complex(D, G).valid


def test_vertex_level_zero_slack_always_verifies():
    # distinct pattern vertices land independently, so at k = 2 the lower
    # level is exactly a product and zero slack is a valid error function
    G = random_hypergraph(2, 2, [3, 2], [3, 3], seed=4)
    S = embedded_complex(G, 1, 4, p_visible=1.0)
    res = check_mean_square_bound(G, S, random_functional(G, S, 4), 1, ErrorFunction.constant(0))
    assert res.holds


def test_unverifiable_delta_is_refused():
    G = random_hypergraph(2, 2, [3, 2], [3, 3], seed=4)
    S = embedded_complex(G, 1, 4, p_visible=1.0)
    with pytest.raises(ValidationError, match="cannot verify"):
        check_mean_square_bound(G, S, random_functional(G, S, 4), 1, ErrorFunction.constant(0),
                                family_limit=3)


def test_failed_verification_is_refused(monkeypatch):
    import hyperreg.lemmas as lemmas

    class Failed:
        passed = False

    monkeypatch.setattr(lemmas, "verify_error_function", lambda *a, **k: Failed())
    G = random_hypergraph(2, 2, [2, 2], [2, 2], seed=4)
    S = embedded_complex(G, 1, 4, p_visible=1.0)
    with pytest.raises(ValidationError, match="not a"):
        check_mean_square_bound(G, S, random_functional(G, S, 4), 1, ErrorFunction.constant(0))


@given(st.integers(0, 10 ** 6))
def test_mean_square_holds_on_random_instances(seed):
    desc = {"r": 2, "k": 2, "b": [2, 2], "parts": [2, 3], "h": 1, "seed": seed, "m": 1,
            "p_visible": 1.0}
    G, S, F = mean_square_instance(desc)
    res = check_mean_square_bound(G, S, F, 1, ErrorFunction.constant(0), verify=False)
    assert res.holds and res.extra["chain_holds"]
    cond = res.extra.get("conditional")
    if cond is not None:
        assert cond.holds


def test_shipped_corpus_passes():
    corpus = load_corpus()
    assert {"nested", "counting", "mean_square"} <= set(corpus)
    for desc in corpus["counting"]:
        assert desc["r"] <= 3 and desc["k"] <= 2 and desc["h"] <= 2 and max(desc["parts"]) <= 3
    rows = run_corpus(corpus)
    assert rows and all(r["skipped"] or r["margin"] >= 0 for r in rows)
    assert not any(r["skipped"] for r in rows)
