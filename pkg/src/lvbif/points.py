"""Bifurcation points on the constant-solution stem.

For each radial mode j with lambda_j < sqrt(mu*sigma) there is a unique
beta_j > sigma/gamma with -delta_1(beta_j) = lambda_j (monotonicity of
-delta_1 makes bracketed bisection unconditionally convergent).  This
module locates the beta_j, builds the local branching direction
h0 = f_j(r) * (m(beta_j), 1), and evaluates the scalar diagnostics that
certify transversality, second-order non-degeneracy, and the jump of
the fixed-point index across beta_j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linearization import index_delta2, neg_delta1, slope_m
from .params import Params, constant_state
from .spectrum import DiscreteOperator, EigenPair

# Non-degeneracy is only generic, not a theorem: near-zero values are
# flagged instead of asserted.
NONDEG_FLAG_TOL = 1e-8


class BracketingError(RuntimeError):
    pass


def admissible_mode_count(p: Params, spectrum: list[EigenPair]) -> int:
    """The unique k with lambda_k < sqrt(mu*sigma) <= lambda_{k+1}.

    k = 0 means no bifurcation points.  Raises if the supplied spectrum
    is too short to certify the count.
    """
    target = np.sqrt(p.mu * p.sigma)
    lams = [pair.lam for pair in spectrum]
    if lams[-1] < target:
        raise ValueError(
            f"spectrum too short: lambda_max={lams[-1]:.6g} < sqrt(mu*sigma)={target:.6g}; "
            "request more modes"
        )
    k = 0
    for pair in spectrum:
        if pair.j >= 1 and pair.lam < target:
            k = pair.j
    return k


def solve_bifurcation_beta(p: Params, lambda_j: float) -> float:
    """Unique root of -delta_1(beta) = lambda_j on (sigma/gamma, inf).

    Bracket by doubling, 80 bisection steps, then 3 secant polish steps.
    """
    if not lambda_j < np.sqrt(p.mu * p.sigma):
        raise ValueError(
            f"no root: lambda_j={lambda_j} >= sqrt(mu*sigma)={np.sqrt(p.mu * p.sigma)}"
        )
    if lambda_j <= 0:
        raise ValueError(f"lambda_j > 0 required, got {lambda_j}")
    fun = lambda beta: float(neg_delta1(p, beta)) - lambda_j
    lo = p.beta_min * (1.0 + 1e-9)
    hi = 2.0 * p.beta_min
    doublings = 0
    while fun(hi) <= 0.0:
        hi *= 2.0
        doublings += 1
        if doublings > 500:
            raise BracketingError(
                f"could not bracket beta_j for lambda_j={lambda_j}"
            )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if fun(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    beta = 0.5 * (lo + hi)
    prev = hi
    for _ in range(3):
        f_beta, f_prev = fun(beta), fun(prev)
        if f_beta == f_prev:
            break
        beta, prev = beta - f_beta * (beta - prev) / (f_beta - f_prev), beta
    return float(beta)


def slope_at_point(p: Params, beta_j: float, lambda_j: float) -> float:
    """m(beta_j) = -(lambda_j + sigma*b)/(beta_j*gamma*b) < 0."""
    cs = constant_state(p, beta_j)
    return -(lambda_j + p.sigma * cs.b) / (beta_j * p.gamma * cs.b)


def bifurcation_direction(p: Params, beta_j: float, pair: EigenPair):
    """Direction field pair h0 = f_j(r) * (m(beta_j), 1)."""
    m = slope_at_point(p, beta_j, pair.lam)
    return m * pair.f, pair.f.copy()


@dataclass(frozen=True)
class TransversalityReport:
    """Scalar diagnostics at a bifurcation point.

    step2_value < 0 certifies the crossing direction, pairing_value != 0
    the non-orthogonality against the adjoint kernel, and the index signs
    (-1, +1) the degree jump.  nondeg_value is reported with a near-zero
    flag, never asserted.
    """

    step2_value: float
    pairing_value: float
    nondeg_value: float
    nondeg_flagged: bool
    index_left: int
    index_right: int


def index_jump_check(p: Params, beta_j: float, lambda_j: float,
                     eps_rel: float = 1e-4, neighbors=()) -> tuple[int, int]:
    """Signs of delta_2(beta, 1) - lambda_j just left/right of beta_j.

    eps is halved while (beta_j - eps, beta_j + eps) contains another
    bifurcation point, down to a 1e-10 relative floor.
    """
    eps = eps_rel * beta_j
    floor = 1e-10 * beta_j
    while any(abs(b - beta_j) <= eps for b in neighbors if b != beta_j):
        eps *= 0.5
        if eps < floor:
            raise ValueError(
                f"cannot separate beta_j={beta_j} from neighbours {neighbors}"
            )
    left = float(index_delta2(p, beta_j - eps, 1.0)) - lambda_j
    right = float(index_delta2(p, beta_j + eps, 1.0)) - lambda_j
    return int(np.sign(left)), int(np.sign(right))


def transversality_check(p: Params, beta_j: float, lambda_j: float,
                         neighbors=()) -> TransversalityReport:
    cs = constant_state(p, beta_j)
    m = slope_at_point(p, beta_j, lambda_j)
    ag = beta_j * beta_j * p.alpha * p.gamma + p.mu * p.sigma
    step2 = (ag - 2.0 * beta_j * p.mu * p.gamma) * m - (ag - 2.0 * beta_j * p.alpha * p.sigma)
    ratio = p.gamma * cs.b / (p.alpha * cs.a)
    pairing = -(p.alpha / p.gamma) * ratio * m + 1.0
    nondeg = m * (p.mu * m + beta_j * p.alpha) * ratio * m + p.sigma + beta_j * p.gamma * m
    scale = abs(p.sigma) + abs(beta_j * p.gamma * m)
    flagged = abs(nondeg) < NONDEG_FLAG_TOL * max(scale, 1.0)
    left, right = index_jump_check(p, beta_j, lambda_j, neighbors=neighbors)
    return TransversalityReport(
        step2_value=float(step2), pairing_value=float(pairing),
        nondeg_value=float(nondeg), nondeg_flagged=bool(flagged),
        index_left=left, index_right=right,
    )


@dataclass(frozen=True)
class BifurcationPoint:
    j: int
    beta_j: float
    lambda_j: float
    m_j: float
    h0: tuple[np.ndarray, np.ndarray]
    diagnostics: TransversalityReport


def find_bifurcation_points(p: Params, spectrum: list[EigenPair]) -> list[BifurcationPoint]:
    """All bifurcation points for modes 1..k of the supplied spectrum."""
    k = admissible_mode_count(p, spectrum)
    betas = {}
    for pair in spectrum:
        if 1 <= pair.j <= k:
            betas[pair.j] = solve_bifurcation_beta(p, pair.lam)
    points = []
    for pair in spectrum:
        if not 1 <= pair.j <= k:
            continue
        beta_j = betas[pair.j]
        neighbors = [b for j, b in betas.items() if j != pair.j]
        report = transversality_check(p, beta_j, pair.lam, neighbors=neighbors)
        h1, h2 = bifurcation_direction(p, beta_j, pair)
        points.append(BifurcationPoint(
            j=pair.j, beta_j=beta_j, lambda_j=pair.lam,
            m_j=slope_at_point(p, beta_j, pair.lam),
            h0=(h1, h2), diagnostics=report,
        ))
    return points


def kernel_singular_values(p: Params, beta_j: float, op: DiscreteOperator) -> np.ndarray:
    """Singular values (ascending) of the dense discretized linearization L(beta_j).

    L couples the two fields through the constant matrix A(beta_j); the
    kernel-dimension check wants exactly one singular value near zero.
    """
    from .linearization import interaction_matrix

    n = op.grid.n
    A = interaction_matrix(p, beta_j)
    lap = np.zeros((n, n))
    idx = np.arange(n)
    lap[idx, idx] = op.main
    lap[idx[:-1], idx[:-1] + 1] = op.upper
    lap[idx[1:], idx[1:] - 1] = op.lower
    L = np.zeros((2 * n, 2 * n))
    L[:n, :n] = lap + A[0, 0] * np.eye(n)
    L[:n, n:] = A[0, 1] * np.eye(n)
    L[n:, :n] = A[1, 0] * np.eye(n)
    L[n:, n:] = lap + A[1, 1] * np.eye(n)
    return np.sort(np.linalg.svd(L, compute_uv=False))


def export_points_csv(path, points: list[BifurcationPoint], meta_line: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta_line:
            fh.write(meta_line + "\n")
        fh.write("j,lambda_j,beta_j,m_j,step2_value,pairing_value,nondeg_value,"
                 "index_left,index_right\n")
        for bp in points:
            d = bp.diagnostics
            row = [bp.j, bp.lambda_j, bp.beta_j, bp.m_j, d.step2_value,
                   d.pairing_value, d.nondeg_value, d.index_left, d.index_right]
            fh.write(",".join(format(v, ".17g") if isinstance(v, float) else str(v)
                              for v in row) + "\n")
