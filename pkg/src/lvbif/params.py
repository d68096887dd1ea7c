"""Model constants, constant/trivial/locked solutions, and the limit nonlinearity.

Single source of truth for the algebraic identities every other module
builds on.  All downstream code receives an immutable :class:`Params`
by value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative margin for the beta > sigma/gamma admissibility check; strict
# parameter inequalities are checked with zero tolerance.
BETA_MARGIN = 1e-12


@dataclass(frozen=True)
class Params:
    """Model constants (mu, sigma, alpha, gamma, N).

    Admissibility: alpha > gamma > 0, sigma >= mu > 0, dim >= 2.
    Violations raise ValueError naming the failed inequality.
    """

    mu: float
    sigma: float
    alpha: float
    gamma: float
    dim: int

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu > 0 fails: mu={self.mu}")
        if not self.sigma >= self.mu:
            raise ValueError(f"sigma >= mu fails: sigma={self.sigma}, mu={self.mu}")
        if not self.gamma > 0:
            raise ValueError(f"gamma > 0 fails: gamma={self.gamma}")
        if not self.alpha > self.gamma:
            raise ValueError(f"alpha > gamma fails: alpha={self.alpha}, gamma={self.gamma}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim >= 2 (integer) fails: dim={self.dim}")

    @property
    def beta_min(self) -> float:
        """Left endpoint sigma/gamma of the admissible beta range."""
        return self.sigma / self.gamma

    def as_dict(self) -> dict:
        """Flat JSON object embedded verbatim in every output file."""
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "dim": int(self.dim),
        }


def validate_params(mu, sigma, alpha, gamma, dim) -> Params:
    """Build a Params record from raw numbers, rejecting inadmissible ones."""
    return Params(float(mu), float(sigma), float(alpha), float(gamma), int(dim))


def require_admissible_beta(p: Params, beta: float) -> None:
    """Check beta > sigma/gamma with relative margin BETA_MARGIN."""
    if not beta > p.beta_min * (1.0 + BETA_MARGIN):
        raise ValueError(
            f"beta > sigma/gamma fails: beta={beta}, sigma/gamma={p.beta_min}"
        )


@dataclass(frozen=True)
class ConstantState:
    """The unique positive constant solution (a, b) at competition rate beta."""

    a: float
    b: float
    beta: float


def constant_state(p: Params, beta: float) -> ConstantState:
    """Closed-form coexistence state for beta > sigma/gamma.

    a = (beta*alpha - mu) * sigma / (beta^2*alpha*gamma - mu*sigma)
    b = (beta*gamma - sigma) * mu / (beta^2*alpha*gamma - mu*sigma)
    """
    require_admissible_beta(p, beta)
    den = beta * beta * p.alpha * p.gamma - p.mu * p.sigma
    a = (beta * p.alpha - p.mu) * p.sigma / den
    b = (beta * p.gamma - p.sigma) * p.mu / den
    return ConstantState(a=a, b=b, beta=beta)


def reaction_terms(p: Params, beta: float, u1, u2):
    """Pointwise reaction right-hand sides of the steady system."""
    r1 = p.mu * u1 * (1.0 - u1) - beta * p.alpha * u1 * u2
    r2 = p.sigma * u2 * (1.0 - u2) - beta * p.gamma * u1 * u2
    return r1, r2


def trivial_states(p: Params):
    """The three constant solutions besides the coexistence state."""
    return ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))


def locked_pair(p: Params, beta: float, w):
    """Map a scalar/field `w` to the proportional solution pair (sigma = mu only).

    Returns (c1*w, c2*w) with c1 = (beta*alpha - mu)/(beta^2*alpha*gamma - mu^2)
    and c2 = (beta*gamma - mu)/(beta^2*alpha*gamma - mu^2).  If w solves the
    scalar equation -Lap w = -mu*w - w^2, the pair solves the shifted
    two-component system; the residual identity holds for arbitrary w:
    the coupled residual equals (c1, c2) times the scalar residual.
    """
    if p.sigma != p.mu:
        raise ValueError(f"locked_pair requires sigma = mu, got sigma={p.sigma}, mu={p.mu}")
    if not beta > p.mu / p.gamma:
        raise ValueError(f"beta > mu/gamma fails: beta={beta}, mu/gamma={p.mu / p.gamma}")
    den = beta * beta * p.alpha * p.gamma - p.mu * p.mu
    c1 = (beta * p.alpha - p.mu) / den
    c2 = (beta * p.gamma - p.mu) / den
    w = np.asarray(w, dtype=float)
    return c1 * w, c2 * w


@dataclass(frozen=True)
class LimitReaction:
    """Piecewise-logistic nonlinearity of the strong-competition limit.

    f(s) = mu*s*(1 - s/gamma) for s >= 0, mu*s*(1 + s/alpha) for s <= 0.
    Continuous, with equal one-sided slopes mu at 0; zeros at -alpha, 0, gamma.
    """

    mu: float
    gamma: float
    alpha: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(
            s >= 0.0,
            self.mu * s * (1.0 - s / self.gamma),
            self.mu * s * (1.0 + s / self.alpha),
        )
        return out if out.ndim else float(out)

    def deriv(self, s):
        """One-sided-consistent derivative; f'(0) = mu from both sides."""
        s = np.asarray(s, dtype=float)
        out = np.where(
            s >= 0.0,
            self.mu * (1.0 - 2.0 * s / self.gamma),
            self.mu * (1.0 + 2.0 * s / self.alpha),
        )
        return out if out.ndim else float(out)


def limit_reaction(p: Params) -> LimitReaction:
    return LimitReaction(mu=p.mu, gamma=p.gamma, alpha=p.alpha)


def limit_reaction_eval(lr: LimitReaction, s):
    return lr(s)
