import numpy as np
import pytest

from conftest import random_beta, random_params
from lvbif.params import (Params, constant_state, limit_reaction, locked_pair,
                          reaction_terms, trivial_states, validate_params)
from lvbif.spectrum import assemble_neumann_laplacian, build_grid


def test_validate_accepts_admissible():
    p = validate_params(1, 1, 2, 1, 2)
    assert (p.mu, p.sigma, p.alpha, p.gamma, p.dim) == (1.0, 1.0, 2.0, 1.0, 2)


def test_validate_rejects_alpha_equal_gamma():
    with pytest.raises(ValueError, match="alpha > gamma"):
        validate_params(1, 1, 1, 1, 2)


def test_validate_rejects_sigma_below_mu():
    with pytest.raises(ValueError, match="sigma >= mu"):
        validate_params(2, 1, 2, 1, 2)


def test_validate_rejects_nonpositive_mu_and_low_dim():
    with pytest.raises(ValueError, match="mu > 0"):
        validate_params(0, 1, 2, 1, 2)
    with pytest.raises(ValueError, match="dim >= 2"):
        validate_params(1, 1, 2, 1, 1)


def test_constant_state_worked_case(p_worked):
    cs = constant_state(p_worked, 2.0)
    assert cs.a == pytest.approx(3.0 / 7.0, abs=1e-16)
    assert cs.b == pytest.approx(1.0 / 7.0, abs=1e-16)


def test_constant_state_rejects_beta_at_boundary(p_worked):
    with pytest.raises(ValueError, match="beta > sigma/gamma"):
        constant_state(p_worked, p_worked.beta_min)


def test_constant_state_zeroes_reaction_terms():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = random_params(rng)
        beta = random_beta(rng, p)
        cs = constant_state(p, beta)
        r1, r2 = reaction_terms(p, beta, cs.a, cs.b)
        scale = max(p.mu, p.sigma)
        assert abs(r1) < 1e-14 * scale
        assert abs(r2) < 1e-14 * scale
        assert 0.0 < cs.a < 1.0
        assert 0.0 < cs.b < 1.0


def test_constant_state_b_vanishes_at_left_endpoint():
    p = Params(1.0, 3.0, 2.0, 1.0, 2)
    bs = [constant_state(p, p.beta_min * (1 + eps)).b for eps in (1e-3, 1e-6, 1e-9)]
    assert bs[0] > bs[1] > bs[2] > 0.0
    assert bs[2] < 1e-8


def test_trivial_states(p_worked):
    states = trivial_states(p_worked)
    assert len(states) == 3
    assert (0.0, 0.0) in states
    for (u1, u2) in states:
        r1, r2 = reaction_terms(p_worked, 5.0, u1, u2)
        assert r1 == 0.0 and r2 == 0.0


def test_locked_pair_requires_sigma_eq_mu():
    p = Params(1.0, 2.0, 2.0, 1.0, 2)
    with pytest.raises(ValueError, match="sigma = mu"):
        locked_pair(p, 5.0, 0.0)


def test_locked_pair_trivial_images(p16):
    beta = 40.0
    w1, w2 = locked_pair(p16, beta, 0.0)
    assert w1 == 0.0 and w2 == 0.0
    w1, w2 = locked_pair(p16, beta, -p16.mu)
    cs = constant_state(p16, beta)
    assert float(w1) == pytest.approx(-cs.a, rel=1e-14)
    assert float(w2) == pytest.approx(-cs.b, rel=1e-14)


def test_locked_pair_residual_identity(p16):
    # the shifted-system residual of (c1 w, c2 w) equals (c1, c2) times the
    # scalar residual of w in -Lap w = -mu w - w^2, for arbitrary fields w
    grid = build_grid(2, 64)
    op = assemble_neumann_laplacian(grid)
    beta = 50.0
    mu = p16.mu
    cs = constant_state(p16, beta)
    w = grid.r ** 2 - grid.r ** 3 + 0.3
    w1, w2 = locked_pair(p16, beta, w)
    res1 = op.apply(w1) - (w1 + cs.a) * (-mu * w1 - beta * p16.alpha * w2)
    res2 = op.apply(w2) - (w2 + cs.b) * (-mu * w2 - beta * p16.gamma * w1)
    scalar = op.apply(w) - (-mu * w - w * w)
    c1 = (beta * p16.alpha - mu) / (beta ** 2 * p16.alpha * p16.gamma - mu ** 2)
    c2 = (beta * p16.gamma - mu) / (beta ** 2 * p16.alpha * p16.gamma - mu ** 2)
    scale = np.max(np.abs(scalar))
    assert np.max(np.abs(res1 - c1 * scalar)) < 1e-12 * scale
    assert np.max(np.abs(res2 - c2 * scalar)) < 1e-12 * scale


def test_limit_reaction_zeros_and_value():
    lr = limit_reaction(Params(1.0, 1.0, 2.0, 1.0, 2))
    assert lr(1.0) == 0.0          # s = gamma
    assert lr(-2.0) == 0.0         # s = -alpha
    assert lr(0.5) == pytest.approx(0.25, abs=1e-16)
    assert lr(0.0) == 0.0


def test_limit_reaction_continuity_and_slopes():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = random_params(rng, sigma_eq_mu=True)
        lr = limit_reaction(p)
        h = 1e-8
        right = (lr(h) - lr(0.0)) / h
        left = (lr(0.0) - lr(-h)) / h
        assert right == pytest.approx(p.mu, rel=1e-6)
        assert left == pytest.approx(p.mu, rel=1e-6)
        assert lr.deriv(0.0) == p.mu
        s = np.linspace(-p.alpha, p.gamma, 101)
        vals = lr(s)
        assert np.all(np.isfinite(vals))
