import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from a3ps.blend import AlphaSchedule, alpha_at, blend, select_action
from a3ps.env import Action
from a3ps.errors import ContractError, NumericError
from a3ps.nncore import softmax_np

scores = arrays(np.float64, 5, elements=st.floats(-50, 50))


def test_alpha_schedule_examples():
    s = AlphaSchedule()
    assert alpha_at(s, 0) == 0.6
    assert alpha_at(s, 1999) == 0.6
    assert alpha_at(s, 2000) == 0.4
    assert alpha_at(s, 4000) == 0.2
    assert alpha_at(s, 6000) == 0.0
    assert alpha_at(s, 10_499) == 0.0
    assert s.zero_from == 6000


def test_alpha_schedule_closed_form_and_monotone():
    s = AlphaSchedule()
    prev = 1.0
    for ep in range(20_001):
        a = alpha_at(s, ep)
        expected = max(0.0, 0.6 - 0.2 * (ep // 2000))
        assert abs(a - expected) < 1e-12
        assert 0.0 <= a <= prev
        if ep >= 6000:
            assert a == 0.0
        prev = a


def test_alpha_rejects_negative_episode():
    with pytest.raises(ContractError):
        alpha_at(AlphaSchedule(), -1)


@settings(max_examples=100, deadline=None)
@given(scores, scores)
def test_blend_reductions_are_exact(a_adv, a_exp):
    np.testing.assert_array_equal(blend(a_adv, a_exp, 1.0), softmax_np(a_adv))
    np.testing.assert_array_equal(blend(a_adv, a_exp, 0.0), softmax_np(a_exp))


def test_blend_symmetry_case():
    p = blend([2, 0, 0, 0, 0], [0, 2, 0, 0, 0], 0.5)
    assert p[0] == p[1]
    np.testing.assert_allclose(p, softmax_np(np.array([1.0, 1, 0, 0, 0])), rtol=0, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(scores, scores, st.floats(0, 1), st.floats(-30, 30))
def test_blend_shift_invariance_and_validity(a_adv, a_exp, alpha, c):
    p = blend(a_adv, a_exp, alpha)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert (p >= 0).all()
    np.testing.assert_allclose(blend(a_adv + c, a_exp + c, alpha), p, rtol=0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(scores, scores)
def test_argmax_handoff(a_adv, a_exp):
    for x in (a_adv, a_exp):
        top2 = np.sort(x)[-2:]
        assume(top2[1] - top2[0] > 1e-6)
    assert np.argmax(blend(a_adv, a_exp, 1.0)) == np.argmax(a_adv)
    assert np.argmax(blend(a_adv, a_exp, 0.0)) == np.argmax(a_exp)


def test_argmax_handoff_near_endpoints():
    a_adv = np.array([3.0, 0.0, 1.0, -1.0, 0.5])
    a_exp = np.array([0.0, 2.5, -1.0, 1.0, 0.0])
    assert np.argmax(blend(a_adv, a_exp, 0.99)) == 0
    assert np.argmax(blend(a_adv, a_exp, 0.01)) == 1


def test_blend_rejects_bad_inputs():
    with pytest.raises(NumericError):
        blend([np.nan, 0, 0, 0, 0], np.zeros(5), 0.5)
    with pytest.raises(ContractError):
        blend(np.zeros(5), np.zeros(5), 1.5)


def test_select_action_basics():
    rng = np.random.default_rng(0)
    assert select_action([1, 0, 0, 0, 0], "greedy") == Action.UP
    assert select_action([1, 0, 0, 0, 0], "sample", rng) == Action.UP
    assert select_action([0.4, 0.1, 0.4, 0.05, 0.05], "greedy") == Action.UP


def test_select_action_sampling_is_seeded():
    p = [0.1, 0.2, 0.3, 0.25, 0.15]
    a = [select_action(p, "sample", np.random.default_rng(5)) for _ in range(3)]
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    seq1 = [select_action(p, "sample", r1) for _ in range(50)]
    seq2 = [select_action(p, "sample", r2) for _ in range(50)]
    assert seq1 == seq2
    assert len(set(a)) == 1


def test_select_action_sampling_matches_distribution():
    p = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    rng = np.random.default_rng(1)
    counts = np.bincount([select_action(p, "sample", rng) for _ in range(20_000)], minlength=5)
    np.testing.assert_allclose(counts / 20_000, p, atol=0.015)


@pytest.mark.parametrize("bad", [[0.5, 0.5, 0.5, 0, 0], [1.2, -0.2, 0, 0, 0], [1, 0, 0, 0]])
def test_select_action_rejects_invalid(bad):
    with pytest.raises(ContractError):
        select_action(bad, "greedy")
