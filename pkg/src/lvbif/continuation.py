"""Global branch tracing by pseudo-arclength continuation.

A branch is switched on from a bifurcation point with the predictor
(constant state) + amplitude * h0, corrected by a bordered Newton step
that pins the h0-amplitude so the corrector cannot slide back onto the
trivial stem.  Continuation then alternates secant predictors with
bordered correctors; the arclength metric weighs the fields with the
grid inner product and beta with |B_1|^(1/2) so neither dominates.

Every accepted point is audited against the branch invariants: small
residual, 0 < u_i < 1 nodewise, safe distance from the trivial constant
states, H^1 a priori bound, and (when sigma = mu) persistence of the
nodal class of v = (beta*gamma - mu) u1 - (beta*alpha - mu) u2.  A nodal
count change triggers bisected step localization and, if it survives the
smallest step, branch termination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linearization import constant_state_derivative
from .params import Params, constant_state, trivial_states
from .points import BifurcationPoint
from .solver import (DiscreteOperator, NewtonError, StateFields, jacobian,
                     residual, residual_beta_derivative)
from .spectrum import RadialGrid, ball_volume


class ContinuationError(RuntimeError):
    pass


# termination reasons
BETA_CEILING = "beta_ceiling"
STEP_FAILURE = "step_failure"
LOOP_DETECTED = "loop_detected"
POINT_BUDGET = "point_budget"
NODAL_CHANGE = "nodal_change"


@dataclass(frozen=True)
class NodalDiagnostic:
    """Nodal data of v = (beta*gamma - mu) u1 - (beta*alpha - mu) u2.

    `count` is meaningful only when `reliable`; v collapsing to zero is
    the locked-solution alarm.
    """

    count: int
    simple: bool
    reliable: bool
    zero_locations: np.ndarray
    v: np.ndarray
    w: np.ndarray


def count_roots(v: np.ndarray, grid: RadialGrid,
                tol_slope_rel: float = 1e-6, tol_end_rel: float = 1e-8):
    """Locate strict sign changes of v by linear interpolation.

    Returns (count, simple, locations, reliable).  Simplicity requires
    |slope| above tol_slope_rel * max|v| at each root, root separation of
    at least two grid cells, and nonvanishing endpoints.
    """
    scale = float(np.max(np.abs(v)))
    if scale == 0.0 or not np.all(np.isfinite(v)):
        return 0, False, np.array([]), False
    sign_flip = v[:-1] * v[1:] < 0.0
    idx = np.nonzero(sign_flip)[0]
    locations = grid.r[idx] + (grid.r[idx + 1] - grid.r[idx]) * v[idx] / (v[idx] - v[idx + 1])
    slopes = (v[idx + 1] - v[idx]) / (grid.r[idx + 1] - grid.r[idx])
    simple = bool(np.all(np.abs(slopes) > tol_slope_rel * scale))
    if idx.size > 1 and np.any(np.diff(idx) < 2):
        simple = False
    if abs(v[0]) <= tol_end_rel * scale or abs(v[-1]) <= tol_end_rel * scale:
        simple = False
    count = int(idx.size)
    return count, simple, locations, simple


def nodal_fields(state: StateFields, p: Params):
    """The tracked difference fields v and w of a branch state."""
    beta = state.beta
    v = (beta * p.gamma - p.mu) * state.u1 - (beta * p.alpha - p.mu) * state.u2
    w = p.gamma * state.u1 - p.alpha * state.u2
    return v, w


def nodal_count(v: np.ndarray, grid: RadialGrid, w: np.ndarray | None = None) -> NodalDiagnostic:
    count, simple, locations, reliable = count_roots(v, grid)
    if w is None:
        w = np.zeros_like(v)
    return NodalDiagnostic(count=count, simple=simple, reliable=reliable,
                           zero_locations=locations, v=v.copy(), w=w.copy())


def state_nodal_diagnostic(state: StateFields, p: Params) -> NodalDiagnostic:
    v, w = nodal_fields(state, p)
    return nodal_count(v, state.grid, w=w)


@dataclass(frozen=True)
class BranchPoint:
    s: float
    state: StateFields
    nodal: NodalDiagnostic
    sup_u1: float
    sup_u2: float
    h1_sq_u1: float
    h1_sq_u2: float
    overlap: float
    residual: float


@dataclass
class Branch:
    j: int
    direction: int
    origin: BifurcationPoint
    points: list[BranchPoint] = field(default_factory=list)
    termination: str = ""


@dataclass(frozen=True)
class ContinuationConfig:
    """Step and audit controls for a branch run.

    amplitude is relative to the constant-state scale at beta_j; the
    beta ceiling defaults to beta_max_factor * beta_j.
    """

    amplitude: float = 1e-2
    ds0: float | None = None
    ds_min: float = 1e-12
    ds_max: float | None = None
    grow: float = 1.3
    fast_iters: int = 4
    beta_max: float | None = None
    beta_max_factor: float = 1e3
    max_steps: int = 500
    newton_tol: float = 1e-11
    newton_max_iter: int = 12
    arc_tol: float = 1e-10
    residual_tol: float = 1e-10
    trivial_tol: float = 1e-6
    enforce_positivity: bool = True


class _Vector:
    """(u1, u2, beta) triple with the weighted arclength inner product."""

    __slots__ = ("u1", "u2", "beta")

    def __init__(self, u1, u2, beta):
        self.u1, self.u2, self.beta = u1, u2, beta


def _dot(grid: RadialGrid, x: _Vector, y: _Vector) -> float:
    wb = ball_volume(grid.dim)
    return float(grid.weights @ (x.u1 * y.u1 + x.u2 * y.u2) + wb * x.beta * y.beta)


def _norm(grid: RadialGrid, x: _Vector) -> float:
    return float(np.sqrt(_dot(grid, x, x)))


def _corrector(state: StateFields, p: Params, op: DiscreteOperator,
               row: _Vector, gfun, cfg: ContinuationConfig) -> tuple[StateFields, int]:
    """Bordered Newton: residual = 0 plus the scalar constraint gfun = 0.

    `row` holds the constraint derivative ((w-weighted against du), and
    its beta entry already includes the |B_1| metric factor).  Falls
    back to a dense bordered solve if the banded factorization fails
    near a fold.
    """
    grid = state.grid
    wrow1 = grid.weights * row.u1
    wrow2 = grid.weights * row.u2
    s = state.copy()
    prev = np.inf
    for it in range(cfg.newton_max_iter + 1):
        r1, r2 = residual(s, p, op)
        g = gfun(s)
        rnorm = max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))
        if rnorm < cfg.newton_tol and abs(g) < cfg.arc_tol:
            return s, it
        # the attainable residual scales with eps*|J|*|u|; accept stagnation
        # there (the branch audit still enforces its own residual bound)
        scale = max(float(np.max(np.abs(s.u1))), float(np.max(np.abs(s.u2))), 1e-30)
        stall = 64.0 * np.finfo(float).eps * float(np.max(op.main)) * scale
        if rnorm < stall and rnorm > 0.25 * prev and abs(g) < cfg.arc_tol:
            return s, it
        prev = rnorm
        if it == cfg.newton_max_iter:
            raise NewtonError(
                f"bordered corrector stalled: residual {rnorm:.3e}, constraint {g:.3e}",
                residual_norm=rnorm)
        J = jacobian(s, p, op)
        fb1, fb2 = residual_beta_derivative(s, p)
        try:
            z11, z12 = J.solve(-r1, -r2)
            z21, z22 = J.solve(fb1, fb2)
            denom = row.beta - float(wrow1 @ z21 + wrow2 @ z22)
            if denom == 0.0 or not np.isfinite(denom):
                raise np.linalg.LinAlgError("degenerate bordered denominator")
            dbeta = (-g - float(wrow1 @ z11 + wrow2 @ z12)) / denom
            du1 = z11 - dbeta * z21
            du2 = z12 - dbeta * z22
        except np.linalg.LinAlgError:
            du1, du2, dbeta = _dense_bordered_solve(J, fb1, fb2, wrow1, wrow2,
                                                    row.beta, -r1, -r2, -g)
        if not (np.all(np.isfinite(du1)) and np.all(np.isfinite(du2)) and np.isfinite(dbeta)):
            raise NewtonError("bordered step not finite", residual_norm=rnorm)
        s.u1 = s.u1 + du1
        s.u2 = s.u2 + du2
        s.beta = s.beta + dbeta
    raise NewtonError("unreachable")


def _dense_bordered_solve(J, fb1, fb2, wrow1, wrow2, rowbeta, rhs1, rhs2, rhsg):
    n = J.op.grid.n
    A = np.zeros((2 * n + 1, 2 * n + 1))
    A[:2 * n, :2 * n] = J.dense()
    A[:n, -1] = fb1
    A[n:2 * n, -1] = fb2
    A[-1, :n] = wrow1
    A[-1, n:2 * n] = wrow2
    A[-1, -1] = rowbeta
    rhs = np.concatenate([rhs1, rhs2, [rhsg]])
    sol = np.linalg.solve(A, rhs)
    return sol[:n], sol[n:2 * n], float(sol[-1])


def _audit_point(state: StateFields, p: Params, op: DiscreteOperator,
                 cfg: ContinuationConfig, expect_count: int | None):
    """Branch-invariant checks; returns (ok, why, diagnostics)."""
    from .solver import residual_norm

    rnorm = residual_norm(state, p, op)
    if rnorm > cfg.residual_tol:
        return False, f"residual {rnorm:.3e}", None
    if cfg.enforce_positivity:
        if not (np.all(state.u1 > 0.0) and np.all(state.u2 > 0.0)
                and np.all(state.u1 < 1.0) and np.all(state.u2 < 1.0)):
            return False, "positivity 0 < u_i < 1 violated", None
    for (t1, t2) in trivial_states(p):
        dist = max(float(np.max(np.abs(state.u1 - t1))), float(np.max(np.abs(state.u2 - t2))))
        if dist < cfg.trivial_tol:
            return False, f"hit trivial state ({t1:g},{t2:g})", None
    nodal = state_nodal_diagnostic(state, p)
    if expect_count is not None:
        if not nodal.reliable:
            return False, "nodal diagnostic unreliable (locked-solution alarm)", nodal
        if nodal.count != expect_count:
            return False, f"nodal count {nodal.count} != {expect_count}", nodal
    return True, "", nodal


def _make_point(state: StateFields, p: Params, op: DiscreteOperator,
                s_arc: float, nodal: NodalDiagnostic | None) -> BranchPoint:
    from .solver import residual_norm

    grid = state.grid
    if nodal is None:
        nodal = state_nodal_diagnostic(state, p)
    return BranchPoint(
        s=s_arc,
        state=state,
        nodal=nodal,
        sup_u1=float(np.max(np.abs(state.u1))),
        sup_u2=float(np.max(np.abs(state.u2))),
        h1_sq_u1=op.quadratic_form(state.u1),
        h1_sq_u2=op.quadratic_form(state.u2),
        overlap=grid.integrate(state.u1 ** 2 * state.u2),
        residual=residual_norm(state, p, op),
    )


def _switch_amplitude(p: Params, origin: BifurcationPoint, amplitude_rel: float) -> float:
    cs = constant_state(p, origin.beta_j)
    return amplitude_rel * min(cs.a / max(abs(origin.m_j), 1.0), cs.b)


def branch_switch(origin: BifurcationPoint, p: Params, op: DiscreteOperator,
                  amplitude: float = 1e-2, direction: int = 1,
                  cfg: ContinuationConfig | None = None) -> BranchPoint:
    """Newton-corrected point off the trivial stem near the bifurcation point.

    Predictor: constant state + amp * h0 at beta_j.  The first correction
    keeps beta frozen; afterwards beta is released and the h0-amplitude
    of (u - constant state) is pinned, which excludes collapse onto the
    stem.  If the corrected point still lands on the stem the amplitude
    is doubled, up to 3 attempts.
    """
    cfg = cfg or ContinuationConfig(amplitude=amplitude)
    grid = op.grid
    h1, h2 = origin.h0
    beta_j = origin.beta_j
    h0_sq = float(grid.weights @ (h1 * h1 + h2 * h2))
    base_amp = _switch_amplitude(p, origin, amplitude)
    last_exc = None
    for attempt in range(3):
        amp = direction * base_amp * 2.0 ** attempt
        cs = constant_state(p, beta_j)
        state = StateFields(grid, cs.a + amp * h1, cs.b + amp * h2, beta_j)
        # one frozen-beta correction pulls the predictor toward the manifold
        J = jacobian(state, p, op)
        r1, r2 = residual(state, p, op)
        try:
            du1, du2 = J.solve(-r1, -r2)
            state.u1 += du1
            state.u2 += du2
        except np.linalg.LinAlgError:
            pass  # exactly singular at the bifurcation point; pinned corrector handles it

        def gfun(s, amp=amp):
            csb = constant_state(p, s.beta)
            return float(grid.weights @ ((s.u1 - csb.a) * h1 + (s.u2 - csb.b) * h2)) - amp * h0_sq

        da, db = constant_state_derivative(p, beta_j)
        gbeta = -(da * float(grid.weights @ h1) + db * float(grid.weights @ h2))
        row = _Vector(h1, h2, gbeta)
        try:
            corrected, _ = _corrector(state, p, op, row, gfun, cfg)
        except NewtonError as exc:
            last_exc = exc
            continue
        csb = constant_state(p, corrected.beta)
        dist = max(float(np.max(np.abs(corrected.u1 - csb.a))),
                   float(np.max(np.abs(corrected.u2 - csb.b))))
        if dist < 0.05 * abs(amp) * max(np.max(np.abs(h1)), np.max(np.abs(h2))):
            last_exc = ContinuationError("corrector fell back onto the trivial stem")
            continue
        stem = _Vector(corrected.u1 - csb.a, corrected.u2 - csb.b, corrected.beta - beta_j)
        return _make_point(corrected, p, op, _norm(grid, stem), None)
    raise ContinuationError(f"branch switch failed after 3 amplitude doublings: {last_exc}")


def continue_branch(origin: BifurcationPoint, p: Params, op: DiscreteOperator,
                    direction: int = 1, cfg: ContinuationConfig | None = None) -> Branch:
    """Trace one direction of the branch through `origin`.

    Stops at the beta ceiling, on step collapse, on loop detection, or
    when the point budget is exhausted; the reason is recorded on the
    returned Branch.
    """
    cfg = cfg or ContinuationConfig()
    grid = op.grid
    beta_max = cfg.beta_max if cfg.beta_max is not None else cfg.beta_max_factor * origin.beta_j
    enforce_nodal = p.sigma == p.mu
    expect = origin.j if enforce_nodal else None

    branch = Branch(j=origin.j, direction=direction, origin=origin)
    first = branch_switch(origin, p, op, amplitude=cfg.amplitude,
                          direction=direction, cfg=cfg)
    ok, why, nodal = _audit_point(first.state, p, op, cfg, expect)
    if not ok:
        raise ContinuationError(f"switch point fails branch invariants: {why}")
    branch.points.append(first)

    cs0 = constant_state(p, origin.beta_j)
    stem_vec = _Vector(np.full(grid.n, cs0.a), np.full(grid.n, cs0.b), origin.beta_j)
    x_prev = stem_vec
    x_curr = _Vector(first.state.u1, first.state.u2, first.state.beta)
    switch_dist = _norm(grid, _Vector(x_curr.u1 - stem_vec.u1, x_curr.u2 - stem_vec.u2,
                                      x_curr.beta - stem_vec.beta))
    ds = cfg.ds0 if cfg.ds0 is not None else switch_dist
    s_arc = first.s

    if first.state.beta >= beta_max:
        branch.termination = BETA_CEILING
        return branch

    while True:
        if len(branch.points) >= cfg.max_steps:
            branch.termination = POINT_BUDGET
            return branch
        tau = _Vector(x_curr.u1 - x_prev.u1, x_curr.u2 - x_prev.u2, x_curr.beta - x_prev.beta)
        tn = _norm(grid, tau)
        tau = _Vector(tau.u1 / tn, tau.u2 / tn, tau.beta / tn)

        accepted = None
        last_why = ""
        while accepted is None:
            pred = StateFields(grid, x_curr.u1 + ds * tau.u1, x_curr.u2 + ds * tau.u2,
                               x_curr.beta + ds * tau.beta)
            wb = ball_volume(grid.dim)
            row = _Vector(tau.u1, tau.u2, wb * tau.beta)

            def gfun(s, ds=ds):
                dx = _Vector(s.u1 - x_curr.u1, s.u2 - x_curr.u2, s.beta - x_curr.beta)
                return _dot(grid, dx, tau) - ds

            try:
                corrected, iters = _corrector(pred, p, op, row, gfun, cfg)
            except NewtonError as exc:
                corrected, last_why = None, f"corrector: {exc}"
            if corrected is not None:
                ok, why, nodal = _audit_point(corrected, p, op, cfg, expect)
                if ok:
                    accepted = (corrected, iters, nodal)
                    break
                last_why = why
            # halving the step bisects toward the previous point, localizing
            # nodal or positivity events before giving up
            ds *= 0.5
            if ds < cfg.ds_min:
                branch.termination = NODAL_CHANGE if "nodal" in last_why else STEP_FAILURE
                return branch

        corrected, iters, nodal = accepted
        x_prev = x_curr
        x_curr = _Vector(corrected.u1, corrected.u2, corrected.beta)
        step_vec = _Vector(x_curr.u1 - x_prev.u1, x_curr.u2 - x_prev.u2, x_curr.beta - x_prev.beta)
        s_arc += _norm(grid, step_vec)
        branch.points.append(_make_point(corrected, p, op, s_arc, nodal))

        if corrected.beta >= beta_max:
            branch.termination = BETA_CEILING
            return branch
        if len(branch.points) > 5:
            back = _Vector(x_curr.u1 - branch.points[0].state.u1,
                           x_curr.u2 - branch.points[0].state.u2,
                           x_curr.beta - branch.points[0].state.beta)
            if _norm(grid, back) < 0.5 * switch_dist:
                branch.termination = LOOP_DETECTED
                return branch
        if iters <= cfg.fast_iters:
            ds *= cfg.grow
        if cfg.ds_max is not None:
            ds = min(ds, cfg.ds_max)


def branch_diagnostics(bp: BranchPoint, p: Params, op: DiscreteOperator,
                       profile=None) -> dict:
    """Extended per-point report: overlap, segregation field, profile distance."""
    v, w = nodal_fields(bp.state, p)
    out = {
        "beta": bp.state.beta,
        "overlap": bp.overlap,
        "sup_u1": bp.sup_u1,
        "sup_u2": bp.sup_u2,
        "h1_sq_u1": bp.h1_sq_u1,
        "h1_sq_u2": bp.h1_sq_u2,
        "nodal_count": bp.nodal.count,
        "nodal_simple": bp.nodal.simple,
        "w_sup": float(np.max(np.abs(w))),
    }
    if profile is not None:
        from .limit import segregation_distance
        out["limit_distance"] = segregation_distance(bp.state, p, profile)
    return out


def export_branch_summary_csv(path, branch: Branch, meta_line: str = "") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if meta_line:
            fh.write(meta_line + "\n")
        fh.write("s,beta,sup_u1,sup_u2,nodal_count,nodal_simple,overlap,"
                 "h1_sq_u1,h1_sq_u2,residual\n")
        for pt in branch.points:
            fh.write(",".join([
                format(pt.s, ".17g"), format(pt.state.beta, ".17g"),
                format(pt.sup_u1, ".17g"), format(pt.sup_u2, ".17g"),
                str(pt.nodal.count), str(int(pt.nodal.simple)),
                format(pt.overlap, ".17g"),
                format(pt.h1_sq_u1, ".17g"), format(pt.h1_sq_u2, ".17g"),
                format(pt.residual, ".17g"),
            ]) + "\n")


def branch_manifest(branch: Branch, p: Params, schema: str = "1",
                    field_files: list | None = None) -> dict:
    d = branch.origin.diagnostics
    return {
        "schema": schema,
        "params": p.as_dict(),
        "j": branch.j,
        "direction": branch.direction,
        "termination": branch.termination,
        "n_points": len(branch.points),
        "beta_range": [branch.points[0].state.beta, branch.points[-1].state.beta]
        if branch.points else [],
        "origin": {
            "beta_j": branch.origin.beta_j,
            "lambda_j": branch.origin.lambda_j,
            "m_j": branch.origin.m_j,
            "step2_value": d.step2_value,
            "pairing_value": d.pairing_value,
            "nondeg_value": d.nondeg_value,
            "nondeg_flagged": d.nondeg_flagged,
            "index_left": d.index_left,
            "index_right": d.index_right,
        },
        "field_files": field_files or [],
    }
