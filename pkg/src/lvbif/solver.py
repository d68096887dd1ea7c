"""Discrete steady-state system: residual, Jacobian, Newton, stability.

The two fields are interleaved as (u1_0, u2_0, u1_1, u2_1, ...), which
makes the Jacobian a banded matrix with two sub- and two superdiagonals;
linear solves are banded LU at O(n) cost.

Stability convention (documented because it is opposite to the common
dynamical-systems one): the linearized eigenvalue problem is posed as
-Lap phi - V(u) phi = lambda phi, and a solution is *stable* when the
leading eigenvalue - the one with smallest real part - has positive
real part, *unstable* otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .params import Params, constant_state, reaction_terms
from .spectrum import DiscreteOperator, RadialGrid


class SolverError(RuntimeError):
    pass


class NewtonError(SolverError):
    def __init__(self, message, residual_norm=None, smallest_singular_value=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.smallest_singular_value = smallest_singular_value


@dataclass
class StateFields:
    """Radial field pair with its competition rate."""

    grid: RadialGrid
    u1: np.ndarray
    u2: np.ndarray
    beta: float

    def copy(self) -> "StateFields":
        return StateFields(self.grid, self.u1.copy(), self.u2.copy(), self.beta)


def constant_state_fields(p: Params, beta: float, grid: RadialGrid) -> StateFields:
    cs = constant_state(p, beta)
    return StateFields(grid, np.full(grid.n, cs.a), np.full(grid.n, cs.b), beta)


def _check_grid(s: StateFields, op: DiscreteOperator) -> None:
    if s.grid.n != op.grid.n or s.grid.dim != op.grid.dim:
        raise SolverError(
            f"grid mismatch: state n={s.grid.n} dim={s.grid.dim}, "
            f"operator n={op.grid.n} dim={op.grid.dim}"
        )


def residual(s: StateFields, p: Params, op: DiscreteOperator):
    """(-Lap u1 - mu u1(1-u1) + beta alpha u1 u2, -Lap u2 - sigma u2(1-u2) + beta gamma u1 u2)."""
    _check_grid(s, op)
    r1, r2 = reaction_terms(p, s.beta, s.u1, s.u2)
    return op.apply(s.u1) - r1, op.apply(s.u2) - r2


def residual_beta_derivative(s: StateFields, p: Params):
    """Partial derivative of the residual with respect to beta."""
    return p.alpha * s.u1 * s.u2, p.gamma * s.u1 * s.u2


@dataclass
class Jacobian:
    """Exact derivative of the residual; banded in interleaved ordering."""

    op: DiscreteOperator
    d11: np.ndarray  # pointwise diagonal of the (u1, u1) block, on top of -Lap
    d12: np.ndarray
    d21: np.ndarray
    d22: np.ndarray

    def matvec(self, h1: np.ndarray, h2: np.ndarray):
        return (self.op.apply(h1) + self.d11 * h1 + self.d12 * h2,
                self.op.apply(h2) + self.d21 * h1 + self.d22 * h2)

    def as_banded(self) -> np.ndarray:
        """(5, 2n) diagonal-ordered form for scipy.linalg.solve_banded."""
        n = self.op.grid.n
        ab = np.zeros((5, 2 * n))
        even = slice(0, 2 * n, 2)
        odd = slice(1, 2 * n, 2)
        ab[2, even] = self.op.main + self.d11
        ab[2, odd] = self.op.main + self.d22
        # coupling within a node: (2i, 2i+1) and (2i+1, 2i)
        ab[1, odd] = self.d12
        ab[3, even] = self.d21
        # neighbour coupling of each field: offsets +-2
        ab[0, 2::2] = self.op.upper
        ab[0, 3::2] = self.op.upper
        ab[4, 0:-2:2] = self.op.lower
        ab[4, 1:-2:2] = self.op.lower
        return ab

    def solve(self, rhs1: np.ndarray, rhs2: np.ndarray):
        n = self.op.grid.n
        rhs = np.empty(2 * n)
        rhs[0::2] = rhs1
        rhs[1::2] = rhs2
        sol = solve_banded((2, 2), self.as_banded(), rhs)
        return sol[0::2], sol[1::2]

    def dense(self) -> np.ndarray:
        n = self.op.grid.n
        idx = np.arange(n)
        lap = np.zeros((n, n))
        lap[idx, idx] = self.op.main
        lap[idx[:-1], idx[:-1] + 1] = self.op.upper
        lap[idx[1:], idx[1:] - 1] = self.op.lower
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = lap + np.diag(self.d11)
        J[:n, n:] = np.diag(self.d12)
        J[n:, :n] = np.diag(self.d21)
        J[n:, n:] = lap + np.diag(self.d22)
        return J

    def smallest_singular_value(self) -> float:
        return float(np.linalg.svd(self.dense(), compute_uv=False).min())


def jacobian(s: StateFields, p: Params, op: DiscreteOperator) -> Jacobian:
    _check_grid(s, op)
    beta = s.beta
    return Jacobian(
        op=op,
        d11=-p.mu + 2.0 * p.mu * s.u1 + beta * p.alpha * s.u2,
        d12=beta * p.alpha * s.u1,
        d21=beta * p.gamma * s.u2,
        d22=-p.sigma + 2.0 * p.sigma * s.u2 + beta * p.gamma * s.u1,
    )


def residual_norm(s: StateFields, p: Params, op: DiscreteOperator) -> float:
    r1, r2 = residual(s, p, op)
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


@dataclass
class NewtonResult:
    state: StateFields
    residual_norm: float
    iterations: int
    history: list = field(default_factory=list)


def newton_solve(start: StateFields, p: Params, op: DiscreteOperator,
                 tol: float = 1e-11, max_iter: int = 30) -> NewtonResult:
    """Newton iteration at frozen beta; raises NewtonError on failure.

    The residual history is recorded so callers can verify the quadratic
    convergence tail.
    """
    _check_grid(start, op)
    s = start.copy()
    history = []
    for it in range(max_iter + 1):
        r1, r2 = residual(s, p, op)
        rnorm = float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))
        history.append(rnorm)
        if rnorm < tol:
            return NewtonResult(state=s, residual_norm=rnorm, iterations=it,
                                history=history)
        if it == max_iter:
            break
        J = jacobian(s, p, op)
        try:
            du1, du2 = J.solve(-r1, -r2)
        except np.linalg.LinAlgError as exc:
            sv = J.smallest_singular_value()
            raise NewtonError(
                f"linear solve failed at iteration {it}: {exc}; "
                f"smallest singular value {sv:.3e}",
                residual_norm=rnorm, smallest_singular_value=sv) from exc
        if not (np.all(np.isfinite(du1)) and np.all(np.isfinite(du2))):
            sv = J.smallest_singular_value()
            raise NewtonError(
                f"singular Jacobian at iteration {it}: smallest singular value {sv:.3e}",
                residual_norm=rnorm, smallest_singular_value=sv)
        s.u1 = s.u1 + du1
        s.u2 = s.u2 + du2
    raise NewtonError(
        f"no convergence in {max_iter} iterations: residual {history[-1]:.3e}",
        residual_norm=history[-1])


@dataclass
class StabilityReport:
    """Leading part of the linearized spectrum at a steady state.

    `leading` is the eigenvalue with smallest real part; `unstable` is
    True when that real part is negative (the convention above).
    """

    leading: complex
    eigenvalues: np.ndarray
    unstable: bool


def linearized_spectrum(s: StateFields, p: Params, op: DiscreteOperator,
                        count: int = 8, residual_tol: float = 1e-9) -> StabilityReport:
    """Eigenvalues of the linearization with smallest real parts.

    The linearized operator coincides with the residual Jacobian, so at
    the constant state the spectrum tensorizes into delta_i(beta) + lambda_j.
    """
    rnorm = residual_norm(s, p, op)
    if rnorm > residual_tol:
        raise SolverError(
            f"state does not solve the system: residual {rnorm:.3e} > {residual_tol:.1e}"
        )
    J = jacobian(s, p, op).dense()
    vals = np.linalg.eigvals(J)
    order = np.argsort(vals.real)
    vals = vals[order][:count]
    leading = vals[0]
    return StabilityReport(leading=complex(leading), eigenvalues=vals,
                           unstable=bool(leading.real < 0.0))


def save_state_csv(path, s: StateFields, meta_line: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta_line:
            fh.write(meta_line + "\n")
        fh.write("r,u1,u2\n")
        for r, a, b in zip(s.grid.r, s.u1, s.u2):
            fh.write(f"{format(r, '.17g')},{format(a, '.17g')},{format(b, '.17g')}\n")


def save_state_sidecar(path, s: StateFields, p: Params, op: DiscreteOperator,
                       report: StabilityReport | None = None,
                       schema: str = "1") -> None:
    payload = {
        "schema": schema,
        "params": p.as_dict(),
        "beta": s.beta,
        "residual_norm": residual_norm(s, p, op),
    }
    if report is not None:
        payload["stability"] = {
            "leading_real": report.leading.real,
            "leading_imag": report.leading.imag,
            "unstable": report.unstable,
        }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
