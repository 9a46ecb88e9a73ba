import pickle

import numpy as np
import pytest
from pydantic import ValidationError

from helpers import random_channels, two_user_channel
from nomabeam.channel import ChannelSet, SolverStatus
from nomabeam.errors import ChannelError
from nomabeam.precoding import SinrSpec, mrc_directions, power_allocation, sinr_of, zf_directions
from nomabeam.socp import (
    BeamSolution,
    Labeler,
    SolverOptions,
    build_cone_program,
    closed_form_k1,
    phase_normalize,
    solve_power_min,
)


def test_solver_options_validation():
    assert SolverOptions().tol_gap == 1e-8
    with pytest.raises(ValidationError):
        SolverOptions(tol_gap=0.0)
    with pytest.raises(ValidationError):
        SolverOptions(max_iter=0)


def test_cone_program_layout(small_channel):
    program = build_cone_program(small_channel, SinrSpec.uniform(3, 5.0))
    assert program.variable_count == 2 * 4 * 3 + 1
    assert program.sinr_cone_dims == (6, 4, 2)
    assert program.epigraph_cone_dim == 25
    assert program.G.shape == (6 + 4 + 2 + 25, 25)
    assert program.A.shape == (3, 25)
    np.testing.assert_array_equal(program.b, 0.0)
    # The noise term closes every SINR cone
    for index in range(3):
        _, h = program.cone_block(index)
        assert h[-1] == pytest.approx(np.sqrt(0.1))


def test_cone_bound_scales_with_sqrt_gamma(small_channel):
    low = build_cone_program(small_channel, SinrSpec([1.0, 1.0, 1.0]))
    high = build_cone_program(small_channel, SinrSpec([4.0, 4.0, 4.0]))
    for index in range(3):
        g_low, _ = low.cone_block(index)
        g_high, _ = high.cone_block(index)
        np.testing.assert_allclose(g_high[0], g_low[0] / 2.0)
        np.testing.assert_array_equal(g_high[1:], g_low[1:])


def test_cone_program_gamma_count(small_channel):
    with pytest.raises(ChannelError):
        build_cone_program(small_channel, SinrSpec.uniform(2, 5.0))


def test_lifting_reproduces_inner_products(small_channel):
    program = build_cone_program(small_channel, SinrSpec([1.0, 1.0, 1.0]))
    rng = np.random.default_rng(0)
    w = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    x = np.concatenate([[1.0]] + [np.concatenate([w[:, i].real, w[:, i].imag]) for i in range(3)])
    inner = small_channel.h.conj().T @ w
    np.testing.assert_allclose(program.A @ x, np.diag(inner).imag, atol=1e-12)
    g, h = program.cone_block(0)
    slack = h - g @ x
    np.testing.assert_allclose(slack[0], inner[0, 0].real, atol=1e-12)
    np.testing.assert_allclose(slack[1:5], [inner[0, 1].real, inner[0, 1].imag, inner[0, 2].real, inner[0, 2].imag], atol=1e-12)


@pytest.mark.parametrize('gamma_db', [0.0, 5.0, 10.0])
def test_solution_is_tight(gamma_db):
    gamma = SinrSpec.uniform(3, gamma_db)
    for c in random_channels(10, 4, 3, seed=int(gamma_db * 10)):
        sol = solve_power_min(c, gamma)
        assert sol.status == SolverStatus.OPTIMAL
        np.testing.assert_allclose(sinr_of(c, sol.w), gamma.gamma, rtol=1e-5)
        inner = np.diag(c.h.conj().T @ sol.w)
        assert np.max(np.abs(inner.imag)) <= 1e-7 * np.max(np.abs(inner))
        assert np.all(inner.real >= 0)
        np.testing.assert_allclose(sol.w, sol.u * np.sqrt(sol.p), atol=1e-9)
        np.testing.assert_allclose(np.linalg.norm(sol.u, axis=0), 1.0)
        assert sol.total_power == pytest.approx(np.sum(np.abs(sol.w) ** 2))


def test_unpolished_solution_is_feasible(small_channel):
    gamma = SinrSpec.uniform(3, 5.0)
    sol = solve_power_min(small_channel, gamma, SolverOptions(polish=False))
    assert sol.status == SolverStatus.OPTIMAL
    assert np.all(sinr_of(small_channel, sol.w) >= gamma.gamma * (1 - 1e-5))
    polished = solve_power_min(small_channel, gamma)
    assert polished.total_power <= sol.total_power * (1 + 1e-7)


def test_single_user_matches_closed_form():
    for c in random_channels(20, 4, 1):
        sol = solve_power_min(c, SinrSpec.uniform(1, 5.0))
        expected = closed_form_k1(c.h[:, 0], SinrSpec.uniform(1, 5.0).gamma[0], c.sigma2)
        assert sol.total_power == pytest.approx(expected.total_power, rel=1e-7)
        np.testing.assert_allclose(sol.u, expected.u, atol=1e-4)


def test_two_user_single_antenna_cascade():
    sol = solve_power_min(two_user_channel(), SinrSpec([1.0, 1.0]))
    assert sol.status == SolverStatus.OPTIMAL
    np.testing.assert_allclose(sol.p, [0.125, 0.025], rtol=1e-8)
    assert sol.total_power == pytest.approx(0.15, rel=1e-8)


def test_label_dominates_baselines():
    gamma = SinrSpec.uniform(3, 5.0)
    for c in random_channels(20, 4, 3):
        label = solve_power_min(c, gamma).total_power
        assert label <= power_allocation(c, mrc_directions(c), gamma).total * (1 + 1e-6)
        assert label <= power_allocation(c, zf_directions(c), gamma).total * (1 + 1e-6)


def test_iteration_limit_reports_failure(small_channel):
    sol = solve_power_min(small_channel, SinrSpec.uniform(3, 5.0), SolverOptions(max_iter=1))
    assert sol.status == SolverStatus.NUMERICAL_FAILURE
    assert not sol.is_optimal
    assert sol.total_power == 0.0


def test_phase_normalize(small_channel):
    rng = np.random.default_rng(1)
    w = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    sol = BeamSolution.from_beamformers(w, SolverStatus.OPTIMAL)
    rotated = phase_normalize(sol, small_channel)
    inner = np.diag(small_channel.h.conj().T @ rotated.w)
    np.testing.assert_allclose(inner.imag, 0.0, atol=1e-12)
    assert np.all(inner.real > 0)
    np.testing.assert_allclose(sinr_of(small_channel, rotated.w), sinr_of(small_channel, w))
    assert rotated.total_power == sol.total_power
    again = phase_normalize(rotated, small_channel)
    np.testing.assert_allclose(again.w, rotated.w, atol=1e-14)


def test_phase_normalize_flags_orthogonal_column():
    c = ChannelSet(h=np.eye(2), sigma2=0.1)
    w = np.array([[0.0, 0.0], [1.0, 1.0j]])
    rotated = phase_normalize(BeamSolution.from_beamformers(w, SolverStatus.OPTIMAL), c)
    assert rotated.unrotated == (0,)
    np.testing.assert_array_equal(rotated.w[:, 0], w[:, 0])
    np.testing.assert_allclose(rotated.w[:, 1], [0.0, 1.0])


def test_closed_form_k1():
    sol = closed_form_k1(np.array([3.0, 4.0j]), 2.0, 0.1)
    assert sol.total_power == pytest.approx(2.0 * 0.1 / 25.0)
    np.testing.assert_allclose(sol.u[:, 0], [0.6, 0.8j])
    with pytest.raises(ChannelError):
        closed_form_k1(np.zeros(3), 1.0, 0.1)


def test_labeler_is_picklable(small_channel):
    labeler = pickle.loads(pickle.dumps(Labeler(SolverOptions(tol_gap=1e-9))))
    assert labeler.opts.tol_gap == 1e-9
    sol = labeler(small_channel, 5.0)
    assert sol.is_optimal


@pytest.mark.slow
def test_solver_acceptance_run():
    for gamma_db in (0.0, 5.0, 10.0):
        gamma = SinrSpec.uniform(3, gamma_db)
        for c in random_channels(500, 4, 3, seed=int(gamma_db) + 100):
            sol = solve_power_min(c, gamma)
            assert sol.status == SolverStatus.OPTIMAL
            np.testing.assert_allclose(sinr_of(c, sol.w), gamma.gamma, rtol=1e-5)


def test_stalled_run_classification():
    from nomabeam.socp import _classify

    opts = SolverOptions(tol_gap=1e-7, tol_feas=1e-7, accept_factor=1e3)
    stalled = {'status': 'unknown', 'x': object(), 'primal infeasibility': 1e-6,
               'dual infeasibility': 1e-6, 'relative gap': 1e-5}
    assert _classify(stalled, opts) == SolverStatus.OPTIMAL
    assert _classify({**stalled, 'relative gap': 1e-3}, opts) == SolverStatus.NUMERICAL_FAILURE
    assert _classify({**stalled, 'x': None}, opts) == SolverStatus.NUMERICAL_FAILURE
    assert _classify({'status': 'primal infeasible'}, opts) == SolverStatus.INFEASIBLE
    assert _classify({'status': 'optimal'}, opts) == SolverStatus.OPTIMAL


@pytest.mark.parametrize('alpha', [0.5, 4.0, 20.0])
def test_power_scales_with_noise(alpha):
    gamma = SinrSpec.uniform(3, 5.0)
    for c in random_channels(5, 4, 3, seed=17):
        scaled = ChannelSet(h=c.h, sigma2=alpha * c.sigma2)
        expected = alpha * solve_power_min(c, gamma).total_power
        assert solve_power_min(scaled, gamma).total_power == pytest.approx(expected, rel=1e-7)


def test_power_invariant_to_channel_phases():
    gamma = SinrSpec.uniform(3, 5.0)
    phases = np.exp(1j * np.array([0.3, -2.0, 1.4]))
    for c in random_channels(5, 4, 3, seed=19):
        rotated = ChannelSet(h=c.h * phases[np.newaxis, :], sigma2=c.sigma2)
        assert solve_power_min(rotated, gamma).total_power == pytest.approx(
            solve_power_min(c, gamma).total_power, rel=1e-7
        )


def test_solver_is_deterministic(small_channel):
    gamma = SinrSpec.uniform(3, 5.0)
    first = solve_power_min(small_channel, gamma)
    second = solve_power_min(small_channel, gamma)
    np.testing.assert_array_equal(first.w, second.w)
    np.testing.assert_array_equal(first.p, second.p)
    assert first.total_power == second.total_power
    assert first.iterations == second.iterations
