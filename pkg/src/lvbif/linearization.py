"""Closed-form 2x2 spectral algebra of the linearized competition system.

Everything here is explicit algebra in the model constants: the coupling
matrix A(beta) at the constant state, its adjoint M(beta), the scaled
matrix D(beta, lambda) from the fixed-point index argument, their
eigenvalues delta_1 <= delta_2, the diagonalizers Q, P, R, and the
kernel slope m(beta).

Numerical care: the radical formulas subtract nearly equal quantities
for large beta, so the smaller-magnitude eigenvalue is always recovered
from det/trace (delta_1 = det A / delta_2, and delta_2 of D from
det D / delta_1).  All scalar functions accept numpy arrays for beta
(and lambda) and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import Params, constant_state, require_admissible_beta


def _ab(p: Params, beta):
    """Vectorized constant-state pair (a_beta, b_beta)."""
    beta = np.asarray(beta, dtype=float)
    den = beta * beta * p.alpha * p.gamma - p.mu * p.sigma
    return (beta * p.alpha - p.mu) * p.sigma / den, (beta * p.gamma - p.sigma) * p.mu / den


def _discriminant(p: Params, beta, a, b):
    return 4.0 * beta * beta * p.alpha * p.gamma * a * b + (p.mu * a - p.sigma * b) ** 2


def delta2_of(p: Params, beta):
    """Larger eigenvalue of A(beta); the plus-branch radical is cancellation-free."""
    a, b = _ab(p, beta)
    beta = np.asarray(beta, dtype=float)
    return 0.5 * (p.mu * a + p.sigma * b + np.sqrt(_discriminant(p, beta, a, b)))


def delta1_of(p: Params, beta):
    """Smaller eigenvalue of A(beta), recovered stably as det A / delta_2."""
    a, b = _ab(p, beta)
    beta = np.asarray(beta, dtype=float)
    det = a * b * (p.mu * p.sigma - beta * beta * p.alpha * p.gamma)
    return det / delta2_of(p, beta)


def neg_delta1(p: Params, beta):
    """-delta_1(beta): zero at beta = sigma/gamma, increasing to sqrt(mu*sigma)."""
    return -delta1_of(p, beta)


def slope_m(p: Params, beta):
    """Kernel slope m(beta) < 0 of the delta_1-eigenvector (m, 1) of A(beta)."""
    a, b = _ab(p, beta)
    beta = np.asarray(beta, dtype=float)
    root = np.sqrt(_discriminant(p, beta, a, b))
    return -(-p.mu * a + p.sigma * b + root) / (2.0 * beta * p.gamma * b)


def constant_state_derivative(p: Params, beta):
    """(da/dbeta, db/dbeta) of the constant state, closed form."""
    beta = np.asarray(beta, dtype=float)
    den = beta * beta * p.alpha * p.gamma - p.mu * p.sigma
    da = -p.sigma * p.alpha * (beta * beta * p.alpha * p.gamma + p.mu * p.sigma
                               - 2.0 * beta * p.gamma * p.mu) / den ** 2
    db = -p.mu * p.gamma * (beta * beta * p.alpha * p.gamma + p.mu * p.sigma
                            - 2.0 * beta * p.alpha * p.sigma) / den ** 2
    return da, db


def interaction_matrix(p: Params, beta: float) -> np.ndarray:
    """A(beta) = [[mu*a, beta*alpha*a], [beta*gamma*b, sigma*b]]."""
    require_admissible_beta(p, beta)
    cs = constant_state(p, beta)
    return np.array([
        [p.mu * cs.a, beta * p.alpha * cs.a],
        [beta * p.gamma * cs.b, p.sigma * cs.b],
    ])


def adjoint_matrix(p: Params, beta: float) -> np.ndarray:
    """M(beta) = A(beta)^T; same eigenvalues, diagonalized by P."""
    return interaction_matrix(p, beta).T


@dataclass(frozen=True)
class LinearizationSpectrum:
    """delta_1 < 0 < delta_2 of A(beta), slope m < 0, diagonalizers Q and P."""

    beta: float
    delta1: float
    delta2: float
    m: float
    Q: np.ndarray
    P: np.ndarray


def spectral_split(p: Params, beta: float) -> LinearizationSpectrum:
    require_admissible_beta(p, beta)
    a, b = _ab(p, beta)
    root = np.sqrt(_discriminant(p, beta, a, b))
    d2 = 0.5 * (p.mu * a + p.sigma * b + root)
    d1 = a * b * (p.mu * p.sigma - beta * beta * p.alpha * p.gamma) / d2
    m = -(-p.mu * a + p.sigma * b + root) / (2.0 * beta * p.gamma * b)
    # second columns carry the delta_2-eigenvectors
    q2 = -(-p.mu * a + p.sigma * b - root) / (2.0 * beta * p.gamma * b)
    Q = np.array([[m, q2], [1.0, 1.0]])
    ratio = p.gamma * b / (p.alpha * a)
    P = np.array([[ratio * m, ratio * q2], [1.0, 1.0]])
    return LinearizationSpectrum(beta=beta, delta1=float(d1), delta2=float(d2),
                                 m=float(m), Q=Q, P=P)


@dataclass(frozen=True)
class IndexSpectrum:
    """Two-parameter eigenvalues of D(beta, lambda) with diagonalizer R.

    lambda >= 1; lambda = 1 is the closure point where D(beta, 1) = -A(beta)
    entrywise, so delta2(beta, 1) = -delta1(beta).
    """

    beta: float
    lam: float
    delta1: float
    delta2: float
    R: np.ndarray


def index_matrix(p: Params, beta: float, lam: float) -> np.ndarray:
    """D(beta, lambda) = (1/lambda) [[-mu*l + b*alpha*b_beta, -b*alpha*a_beta], ...]."""
    require_admissible_beta(p, beta)
    a, b = _ab(p, beta)
    return np.array([
        [-p.mu * lam + beta * p.alpha * b, -beta * p.alpha * a],
        [-beta * p.gamma * b, -p.sigma * lam + beta * p.gamma * a],
    ]) / lam


def index_delta1(p: Params, beta, lam):
    """delta_1(beta, lambda) < 0, via the positive-discriminant rearrangement."""
    a, b = _ab(p, beta)
    beta = np.asarray(beta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    t = p.mu + p.sigma - beta / lam * (p.alpha * b + p.gamma * a)
    disc = (p.sigma - p.mu - beta / lam * (p.gamma * a - p.alpha * b)) ** 2 \
        + 4.0 * (beta / lam) ** 2 * p.alpha * p.gamma * a * b
    return 0.5 * (-t - np.sqrt(disc))


def index_delta2(p: Params, beta, lam):
    """delta_2(beta, lambda) = det D / delta_1, avoiding cancellation near its zero."""
    a, b = _ab(p, beta)
    beta = np.asarray(beta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    det = ((-p.mu * lam + beta * p.alpha * b) * (-p.sigma * lam + beta * p.gamma * a)
           - beta * beta * p.alpha * p.gamma * a * b) / (lam * lam)
    return det / index_delta1(p, beta, lam)


def index_spectrum(p: Params, beta: float, lam: float) -> IndexSpectrum:
    if lam < 1.0:
        raise ValueError(f"lambda >= 1 required, got {lam}")
    require_admissible_beta(p, beta)
    a, b = _ab(p, beta)
    d1 = float(index_delta1(p, beta, lam))
    d2 = float(index_delta2(p, beta, lam))
    # eigenvector columns (v, 1) with v from the second row of (D - delta I)
    bgb = beta * p.gamma * b
    r1 = (p.mu * lam - beta * p.alpha * b + lam * d2) / bgb
    r2 = -(p.sigma * lam - beta * p.gamma * a + lam * d2) / bgb
    R = np.array([[r1, r2], [1.0, 1.0]])
    return IndexSpectrum(beta=beta, lam=lam, delta1=d1, delta2=d2, R=R)
