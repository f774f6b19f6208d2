import numpy as np
import pytest

from maxinv.adjoint import CutoffSpec
from maxinv.fields import CoefficientField, FieldHistory, Inclusion, ObservationTrace, phantom
from maxinv.forward import SourcePulse, TimeLoopSpec, solve_forward
from maxinv.objective import (InverseProblem, TikhonovParams, grad_epsilon, grad_mu, misfit,
                              regularization, tikhonov)

INC = Inclusion(((-0.2, 0.0), (-0.1, 0.1), (-0.1, 0.0)), 4.0, 1.5)


def _obs(rng, N=60, P=11, tau=0.01):
    return ObservationTrace(rng.standard_normal((N + 1, P, 3)), tau, N * tau)


def test_tikhonov_zero_at_truth(small, rng):
    g, m, _ = small
    obs = _obs(rng)
    assert tikhonov(obs, obs, CoefficientField.uniform(g), TikhonovParams(), g.h) == 0.0


def test_tikhonov_pure_regularization(small, rng):
    g, m, _ = small
    obs = _obs(rng)
    c = CoefficientField.uniform(g)
    c.eps[m.inner] = 3.0
    p = TikhonovParams(0.01, 0.9)
    expected = 0.5 * 0.01 * g.h ** 3 * 4.0 * m.inner.sum()
    assert tikhonov(obs, obs, c, p, g.h) == pytest.approx(expected, rel=1e-14)


def test_misfit_is_quadratic(rng):
    obs = _obs(rng)
    E = _obs(rng)
    E2 = ObservationTrace(obs.data + 2 * (E.data - obs.data), obs.tau, obs.T)
    spec = CutoffSpec(obs.T)
    assert misfit(E2, obs, spec, 0.1) == pytest.approx(4 * misfit(E, obs, spec, 0.1), rel=1e-13)


def test_regularization_weights(small):
    g, m, _ = small
    c = CoefficientField.uniform(g, mu=2.0)
    assert regularization(c, TikhonovParams(0.0, 0.5), g.h) == pytest.approx(
        0.5 * 0.5 * g.h ** 3 * g.size)


def test_negative_gamma_rejected():
    with pytest.raises(ValueError):
        TikhonovParams(-0.1, 0.9)


def _hist(rng, g, N=10, tau=0.01, zero=False):
    f = np.zeros((N + 1, 3) + g.shape) if zero else rng.standard_normal((N + 1, 3) + g.shape)
    return FieldHistory(f, tau, N * tau)


def test_gradients_with_zero_adjoint(small, rng):
    g, m, _ = small
    E, lam = _hist(rng, g), _hist(rng, g, zero=True)
    p = TikhonovParams(0.01, 0.9)
    c = CoefficientField.uniform(g)
    assert not np.any(grad_epsilon(E, lam, c, p, m))
    assert not np.any(grad_mu(E, lam, c, p, m))
    node = (6, 4, 4)
    assert m.inner[node]
    c.eps[node] += 1.0
    ge = grad_epsilon(E, lam, c, p, m)
    assert ge[node] == pytest.approx(0.01)
    assert np.count_nonzero(ge) == 1


def test_mu_gradient_scales_with_inverse_square(small, rng):
    g, m, _ = small
    E, lam = _hist(rng, g), _hist(rng, g)
    p = TikhonovParams(0.0, 0.0)
    g1 = grad_mu(E, lam, CoefficientField.uniform(g), p, m)
    g2 = grad_mu(E, lam, CoefficientField.uniform(g, mu=2.0), p, m)
    assert np.allclose(g2, g1 / 4, rtol=1e-13, atol=0)


@pytest.mark.parametrize("form", ["transpose", "divergence"])
def test_outer_entries_are_zero(small, rng, form):
    g, m, _ = small
    E, lam = _hist(rng, g), _hist(rng, g)
    c = CoefficientField.uniform(g)
    p = TikhonovParams()
    assert not np.any(grad_epsilon(E, lam, c, p, m, penalty_form=form)[m.outer])
    assert not np.any(grad_mu(E, lam, c, p, m)[m.outer])


def test_unknown_penalty_form(small, rng):
    g, m, _ = small
    with pytest.raises(ValueError):
        grad_epsilon(_hist(rng, g), _hist(rng, g), CoefficientField.uniform(g), TikhonovParams(),
                     m, penalty_form="curl")


def _problem(small, gamma=(0.0, 0.0)):
    g, m, bm = small
    src = SourcePulse(20.0, amplitude=10.0)
    loop = TimeLoopSpec(0.005, 0.8)
    truth = phantom(g, m, [INC])
    obs = solve_forward(truth, src, loop, bm, record="trace")
    return InverseProblem(g, m, bm, src, loop, obs, TikhonovParams(*gamma)), truth


def test_stationary_at_truth(small):
    prob, truth = _problem(small, (0.01, 0.9))
    ev = prob.value_and_gradient(truth.copy())
    # priors differ from the truth, so only the regularization part remains
    assert ev.misfit == 0.0
    assert np.allclose(ev.gradient.g_eps, np.where(small[1].inner, 0.01 * (truth.eps - 1), 0))
    assert np.allclose(ev.gradient.g_mu, np.where(small[1].inner, 0.9 * (truth.mu - 1), 0))


def test_directional_derivative(small, rng):
    prob, truth = _problem(small)
    g, m, _ = small
    c = CoefficientField.uniform(g)
    d_eps = np.where(m.inner, rng.random(g.shape), 0.0)
    d_mu = np.where(m.inner, rng.random(g.shape), 0.0)
    hs = 1e-3

    def F(sgn):
        cc = c.copy()
        cc.eps += sgn * hs * d_eps
        cc.mu += sgn * hs * d_mu
        return prob.value(cc.clamped(m)).value

    # step back into the box: start from 1 + 2 hs on the inner nodes
    c.eps[m.inner] += 2 * hs
    c.mu[m.inner] += 2 * hs
    ev = prob.value_and_gradient(c)
    adj = g.h ** 3 * (np.vdot(ev.gradient.g_eps, d_eps) + np.vdot(ev.gradient.g_mu, d_mu))
    fd = (F(1) - F(-1)) / (2 * hs)
    assert np.sign(fd) == np.sign(adj)
    assert abs(fd - adj) <= 5e-2 * abs(fd)
