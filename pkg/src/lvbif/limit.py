"""Strong-competition limit profiles and segregation diagnostics.

For sigma = mu the difference field w_beta = gamma*u1 - alpha*u2 along
the j-th branch converges (beta -> infinity) to a solution w of the
scalar equation -Lap_r w = f(w) with the piecewise-logistic f from
params.LimitReaction, and w keeps exactly j simple radial roots.  This
module solves that limit equation by Newton iteration seeded with a
scaled eigenfunction, measures sup-norm distances of branch states to
the profile, and evaluates the overlap decay along a branch.

The same Newton driver also solves the quadratic equation
-Lap_r w = -mu*w - w^2 behind the locked (proportional) solution family,
whose nonconstant solutions must have w + mu changing sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .continuation import Branch, count_roots, nodal_fields
from .params import Params, limit_reaction
from .solver import StateFields
from .spectrum import DiscreteOperator, EigenPair, RadialGrid


class LimitSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class LimitProfile:
    w: np.ndarray
    j: int
    roots: np.ndarray
    residual: float


def _newton_scalar_field(op: DiscreteOperator, g, gprime, seed: np.ndarray,
                         tol: float = 1e-11, max_iter: int = 60) -> tuple[np.ndarray, float]:
    """Newton for -Lap w - g(w) = 0 with tridiagonal banded solves.

    Accepts stagnation at the attainable roundoff floor eps*|J|*|w|,
    which sits above an absolute tol for large operators or field scales.
    """
    n = op.grid.n
    w = seed.astype(float).copy()
    prev = np.inf
    for _ in range(max_iter):
        res = op.apply(w) - g(w)
        rnorm = float(np.max(np.abs(res)))
        if rnorm < tol:
            return w, rnorm
        stall = 64.0 * np.finfo(float).eps * \
            (float(np.max(op.main)) + float(np.max(np.abs(gprime(w))))) * \
            max(float(np.max(np.abs(w))), 1e-30)
        if rnorm < stall and rnorm > 0.25 * prev:
            return w, rnorm
        prev = rnorm
        ab = np.zeros((3, n))
        ab[0, 1:] = op.upper
        ab[1] = op.main - gprime(w)
        ab[2, :-1] = op.lower
        try:
            dw = solve_banded((1, 1), ab, -res)
        except np.linalg.LinAlgError as exc:
            raise LimitSolveError(f"linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(dw)):
            raise LimitSolveError("Newton step not finite")
        w += dw
    raise LimitSolveError(f"no convergence: residual {rnorm:.3e}")


def solve_limit_equation(p: Params, j: int, grid: RadialGrid, op: DiscreteOperator,
                         pair: EigenPair, seed: np.ndarray | None = None,
                         sign: int = 1, tol: float = 1e-11) -> LimitProfile:
    """j-nodal solution of -Lap_r w = f(w); requires sigma = mu > lambda_j.

    Default seed is eps * f_j with eps = 0.1 * min(gamma, alpha); on
    convergence to the wrong nodal class the amplitude is adjusted
    (x0.5, x2 of the base) before giving up.
    """
    if p.sigma != p.mu:
        raise LimitSolveError(f"limit equation requires sigma = mu, got {p.sigma} != {p.mu}")
    if not p.mu > pair.lam:
        raise LimitSolveError(
            f"mu > lambda_j required for a {j}-nodal solution: mu={p.mu}, lambda_j={pair.lam}")
    if pair.j != j:
        raise LimitSolveError(f"eigenpair index {pair.j} does not match requested j={j}")
    lr = limit_reaction(p)
    eps0 = 0.1 * min(p.gamma, p.alpha)
    attempts = (1.0, 2.0, 0.5) if seed is None else (1.0,)
    last = "no attempt"
    for factor in attempts:
        start = seed if seed is not None else sign * eps0 * factor * pair.f
        try:
            w, rnorm = _newton_scalar_field(op, lr, lr.deriv, start, tol=tol)
        except LimitSolveError as exc:
            last = str(exc)
            continue
        if float(np.max(np.abs(w))) < 1e-4 * min(p.gamma, p.alpha):
            last = "collapsed to the zero solution"
            continue
        count, simple, roots, reliable = count_roots(w, grid)
        if not (reliable and simple and count == j):
            last = f"converged to nodal class {count} (simple={simple})"
            continue
        if not (np.all(w > -p.alpha) and np.all(w < p.gamma)):
            last = "solution escapes (-alpha, gamma)"
            continue
        orient = 1 if float(grid.weights @ (w * pair.f)) >= 0 else -1
        want = 1 if float(grid.weights @ (start * pair.f)) >= 0 else -1
        if orient != want:
            last = f"wrong orientation ({orient} vs {want})"
            continue
        return LimitProfile(w=w, j=j, roots=roots, residual=rnorm)
    raise LimitSolveError(f"could not reach the {j}-nodal class: {last}")


def solve_locked_equation(p: Params, grid: RadialGrid, op: DiscreteOperator,
                          pair: EigenPair, eps: float | None = None,
                          tol: float = 1e-11) -> np.ndarray:
    """Nonconstant solution of -Lap_r w = -mu*w - w^2 (locked-family equation).

    Bifurcates from the constant w = -mu when mu crosses lambda_j; the
    seed is -mu + eps*f_j.  Nonconstant solutions satisfy w < 0 with
    w + mu changing sign.
    """
    if not p.mu > pair.lam:
        raise LimitSolveError(
            f"mu > lambda_j required: mu={p.mu}, lambda_j={pair.lam}")
    g = lambda w: -p.mu * w - w * w
    gprime = lambda w: -p.mu - 2.0 * w
    base = eps if eps is not None else 0.45 * p.mu
    last = "no attempt"
    for factor in (1.0, 0.5, 1.5):
        seed = -p.mu + base * factor * pair.f
        try:
            w, _ = _newton_scalar_field(op, g, gprime, seed, tol=tol)
        except LimitSolveError as exc:
            last = str(exc)
            continue
        if float(np.max(np.abs(w + p.mu))) > 1e-6 * p.mu and float(np.max(np.abs(w))) > 1e-6 * p.mu:
            return w
        last = "converged to a constant solution"
    raise LimitSolveError(f"no nonconstant locked-equation solution found: {last}")


def segregation_distance(state: StateFields, p: Params, profile: LimitProfile) -> float:
    """Sup-norm distance of gamma*u1 - alpha*u2 to the profile, sign-aligned.

    Branches come in +- pairs; the sign is chosen by the correlation of
    the two fields.
    """
    if state.grid.n != profile.w.size:
        raise ValueError(f"grid mismatch: state n={state.grid.n}, profile n={profile.w.size}")
    wb = p.gamma * state.u1 - p.alpha * state.u2
    corr = float(state.grid.weights @ (wb * profile.w))
    sign = 1.0 if corr >= 0 else -1.0
    return float(np.max(np.abs(wb - sign * profile.w)))


def scaled_nodal_root_gap(state: StateFields, p: Params, profile: LimitProfile) -> float:
    """Largest distance between roots of v_beta/beta and roots of w.

    v_beta/beta = w_beta - (mu/beta) u1 + (mu/beta) u2 converges to w, so
    the root sets converge too (compared pairwise in order).
    """
    v, _ = nodal_fields(state, p)
    count, _, roots_v, reliable = count_roots(v / state.beta, state.grid)
    if not reliable or count != profile.roots.size:
        return float("inf")
    return float(np.max(np.abs(roots_v - profile.roots)))


def overlap_decay(branch: Branch) -> list[tuple[float, float]]:
    """(beta, integral of u1^2 u2) along a sigma = mu branch, ordered by beta."""
    series = [(pt.state.beta, pt.overlap) for pt in branch.points]
    return sorted(series, key=lambda t: t[0])


def export_profile_csv(path, profile: LimitProfile, grid: RadialGrid,
                       meta_line: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta_line:
            fh.write(meta_line + "\n")
        fh.write("r,w\n")
        for r, w in zip(grid.r, profile.w):
            fh.write(f"{format(r, '.17g')},{format(w, '.17g')}\n")
