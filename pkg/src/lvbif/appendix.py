"""Numerical certification of the closed-form scalar inequalities.

The named scalar functions are evaluated along two independent routes:
a factored form following their definitions, and an expanded-coefficient
polynomial evaluated with compensated (two-product) Horner arithmetic,
which keeps the sign trustworthy near cancellation-prone regions.  A
route disagreement beyond 1e-10 of the term-magnitude scale is an
internal error.

Theorem-grade inequalities (g > 0, h > 0 interior, H < 0, the signs of
the two-parameter eigenvalue derivatives, the constant-state sign
identity) are swept over log-uniform random parameter draws and must
hold with zero violations.  The two generic claims (the non-degeneracy
scalar and the sign of the quintic z) are reported, never asserted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linearization import (constant_state_derivative, index_delta1,
                            index_delta2, neg_delta1, slope_m)
from .params import Params

_SPLIT = 134217729.0  # 2^27 + 1, Dekker splitting constant
_EPS = np.finfo(float).eps


class AppendixConsistencyError(RuntimeError):
    pass


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    aa = a * _SPLIT
    ahi = aa - (aa - a)
    alo = a - ahi
    bb = b * _SPLIT
    bhi = bb - (bb - b)
    blo = b - bhi
    return p, ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo


def comp_horner(coeffs, x):
    """Compensated Horner evaluation; coeffs from highest degree down.

    Accuracy close to double-double, vectorized over x.
    """
    x = np.asarray(x, dtype=float)
    s = np.full(x.shape, float(coeffs[0])) if x.shape else float(coeffs[0])
    err = np.zeros_like(x) if x.shape else 0.0
    for a in coeffs[1:]:
        p, pe = _two_prod(s, x)
        s, se = _two_sum(p, float(a))
        err = err * x + (pe + se)
    return s + err


def _abs_horner(coeffs, x):
    """Magnitude scale sum |c_i| |x|^i used for relative comparisons."""
    x = np.abs(np.asarray(x, dtype=float))
    s = np.full(x.shape, abs(float(coeffs[0]))) if x.shape else abs(float(coeffs[0]))
    for a in coeffs[1:]:
        s = s * x + abs(float(a))
    return s


def _f_coeffs(p: Params):
    mu, sg, al, ga = p.mu, p.sigma, p.alpha, p.gamma
    return (4 * al**2 * ga**2,
            -4 * al * ga * (al * sg + ga * mu),
            mu * sg * (al + ga) ** 2,
            -2 * mu * sg * (al - ga) * (mu - sg),
            mu * sg * (mu - sg) ** 2)


def _fprime_coeffs(p: Params):
    c4, c3, c2, c1, _ = _f_coeffs(p)
    return (4 * c4, 3 * c3, 2 * c2, c1)


def _h_coeffs(p: Params):
    mu, sg, al, ga = p.mu, p.sigma, p.alpha, p.gamma
    return (4 * al**2 * ga**2 * (al * sg + ga * mu),
            -2 * al * ga * mu * sg * (al**2 + ga**2 + 10 * al * ga),
            6 * al * ga * mu * sg * (al + ga) * (mu + sg),
            -2 * mu * sg * (mu * sg * (al + ga) ** 2 + 2 * al * ga * (mu - sg) ** 2),
            2 * mu**2 * sg**2 * (al - ga) * (mu - sg))


def _H_coeffs(p: Params, lam: float):
    mu, sg, al, ga = p.mu, p.sigma, p.alpha, p.gamma
    return (-(lam + mu) * al * ga**2,
            ga * mu * (2 * ga * lam + sg * al),
            ga * mu * sg * (mu - lam),
            -mu**2 * sg**2)


def _z_coeffs(p: Params, lam: float):
    mu, sg, al, ga = p.mu, p.sigma, p.alpha, p.gamma
    return (lam * al**2 * ga**3 * (sg - lam),
            lam * al * ga**2 * (lam * al * (sg + lam) - sg * (sg * al + 3 * ga * mu)),
            ga**2 * sg * mu * (-ga * sg * mu + lam * al * (5 * sg + 4 * lam)),
            ga * sg * mu * (sg + lam) * (3 * ga * sg * mu - 2 * lam * al * (sg + lam)),
            -3 * ga * sg**2 * mu**2 * (sg + lam) ** 2,
            (sg + lam) ** 3 * sg**2 * mu**2)


def f_factored(p: Params, beta):
    beta = np.asarray(beta, dtype=float)
    return (4 * beta**2 * p.alpha * p.gamma * (beta * p.alpha - p.mu) * (beta * p.gamma - p.sigma)
            + p.mu * p.sigma * (beta * (p.alpha - p.gamma) - (p.mu - p.sigma)) ** 2)


def h_factored(p: Params, beta):
    beta = np.asarray(beta, dtype=float)
    den = beta * beta * p.alpha * p.gamma - p.mu * p.sigma
    fp = comp_horner(_fprime_coeffs(p), beta)
    return fp * den - 4 * beta * p.alpha * p.gamma * f_factored(p, beta)


def _g_bracket(p: Params, beta):
    beta = np.asarray(beta, dtype=float)
    return ((beta * beta * p.alpha * p.gamma + p.mu * p.sigma) * (p.alpha + p.gamma)
            - 2 * beta * p.alpha * p.gamma * (p.mu + p.sigma))


def g_of(p: Params, beta, h_val=None, f_val=None):
    beta = np.asarray(beta, dtype=float)
    h_val = h_factored(p, beta) if h_val is None else h_val
    f_val = f_factored(p, beta) if f_val is None else f_val
    return h_val + 2.0 * np.sqrt(f_val) * np.sqrt(p.mu * p.sigma) * _g_bracket(p, beta)


def H_factored(p: Params, beta, lam):
    beta = np.asarray(beta, dtype=float)
    bound = -lam / p.mu - p.sigma / (beta * p.gamma)
    ag = beta * beta * p.alpha * p.gamma + p.mu * p.sigma
    return p.mu * beta * p.gamma * ((ag - 2 * beta * p.mu * p.gamma) * bound
                                    - (ag - 2 * beta * p.alpha * p.sigma))


def z_factored(p: Params, beta, lam):
    beta = np.asarray(beta, dtype=float)
    t = beta * p.gamma - p.sigma - lam
    head = lam * beta * beta * p.alpha * p.gamma + p.sigma * p.mu * t
    return (-(head ** 2) * t
            + lam * beta**3 * p.alpha * p.gamma**2 * p.sigma
            * (beta * p.alpha - p.mu) * (beta * p.gamma - p.sigma))


@dataclass(frozen=True)
class AppendixFunctions:
    """Values of the named appendix scalars at one (beta, lambda_j) sample."""

    beta: float
    f_beta: float
    h_beta: float
    g_beta: float
    H_beta: float | None
    z_beta: float | None


def _dual(value_fact, coeffs, beta, name):
    value_exp = comp_horner(coeffs, beta)
    scale = _abs_horner(coeffs, beta)
    if np.any(np.abs(value_fact - value_exp) > 1e-10 * np.maximum(scale, 1e-300)):
        worst = float(np.max(np.abs(value_fact - value_exp) / np.maximum(scale, 1e-300)))
        raise AppendixConsistencyError(
            f"factored and expanded evaluations of {name} disagree: rel {worst:.3e}")
    return value_exp


def evaluate_appendix(p: Params, beta: float, lambda_j: float | None = None) -> AppendixFunctions:
    """All appendix scalars by factored AND expanded route; mismatch raises."""
    if not beta > p.beta_min:
        raise ValueError(f"beta > sigma/gamma required, got beta={beta}")
    f_val = _dual(f_factored(p, beta), _f_coeffs(p), beta, "f")
    h_val = _dual(h_factored(p, beta), _h_coeffs(p), beta, "h")
    g_fact = g_of(p, beta)
    g_exp = float(h_val) + 2.0 * np.sqrt(float(f_val)) * np.sqrt(p.mu * p.sigma) \
        * float(_g_bracket(p, beta))
    g_scale = _abs_horner(_h_coeffs(p), beta) + 2.0 * np.sqrt(abs(float(f_val))) \
        * np.sqrt(p.mu * p.sigma) * abs(float(_g_bracket(p, beta)))
    if abs(float(g_fact) - g_exp) > 1e-10 * max(float(g_scale), 1e-300):
        raise AppendixConsistencyError("factored and expanded evaluations of g disagree")
    H_val = z_val = None
    if lambda_j is not None:
        H_val = float(_dual(H_factored(p, beta, lambda_j), _H_coeffs(p, lambda_j), beta, "H"))
        z_val = float(_dual(z_factored(p, beta, lambda_j), _z_coeffs(p, lambda_j), beta, "z"))
    return AppendixFunctions(beta=float(beta), f_beta=float(f_val), h_beta=float(h_val),
                             g_beta=float(g_exp), H_beta=H_val, z_beta=z_val)


def _ineq_record():
    return {"checked": 0, "violations": 0, "worst_margin": np.inf, "worst_sample": None}


def _update(record, margins, sample_maker, floors=0.0):
    """margins > 0 means the inequality holds; track the minimum margin.

    `floors` is the rounding noise of the margin evaluation (relevant for
    finite-difference signs); a sample counts as a violation only when
    its margin is negative beyond that floor.
    """
    margins = np.asarray(margins, dtype=float)
    floors = np.broadcast_to(np.asarray(floors, dtype=float), margins.shape)
    record["checked"] += int(margins.size)
    record["violations"] += int(np.sum(margins <= -floors))
    i = int(np.argmin(margins))
    if margins.flat[i] < record["worst_margin"]:
        record["worst_margin"] = float(margins.flat[i])
        record["worst_sample"] = sample_maker(i)
    return record


def verify_mono_beta(p: Params, beta_grid) -> dict:
    """g > 0 and h > 0 on the grid, -delta_1 increasing, derivative formula."""
    beta = np.sort(np.asarray(beta_grid, dtype=float))
    f_val = f_factored(p, beta)
    h_val = comp_horner(_h_coeffs(p), beta)
    g_val = h_val + 2.0 * np.sqrt(f_val) * np.sqrt(p.mu * p.sigma) * _g_bracket(p, beta)
    report = {
        "g_positive": _update(_ineq_record(), g_val,
                              lambda i: {"beta": float(beta[i]), **p.as_dict()}),
        "h_positive": _update(_ineq_record(), h_val,
                              lambda i: {"beta": float(beta[i]), **p.as_dict()}),
    }
    nd = neg_delta1(p, beta)
    diffs = np.diff(nd)
    floors = 8.0 * _EPS * np.abs(nd[1:])
    report["neg_delta1_increasing"] = _update(
        _ineq_record(), diffs, lambda i: {"beta": float(beta[i]), **p.as_dict()},
        floors=floors)
    # closed-form derivative cross-check; the step tracks the optimal
    # central-difference balance eps^(1/3)
    step = 6e-6 * beta
    fd = (neg_delta1(p, beta + step) - neg_delta1(p, beta - step)) / (2.0 * step)
    den = beta * beta * p.alpha * p.gamma - p.mu * p.sigma
    formula = np.sqrt(p.mu * p.sigma) * g_val / (4.0 * den * den * np.sqrt(f_val))
    rel = np.abs(fd - formula) / np.maximum(np.abs(formula), 1e-300)
    report["derivative_formula_max_rel_err"] = float(np.max(rel))
    return report


def verify_mono_lambda(p: Params, beta_grid, lambda_grid) -> dict:
    """delta_1(beta,lambda) < 0 and the monotonicity signs of delta_2."""
    beta = np.asarray(beta_grid, dtype=float)[:, None]
    lam = np.asarray(lambda_grid, dtype=float)[None, :]

    def sample(i):
        bi, li = np.unravel_index(i, np.broadcast_shapes(beta.shape, lam.shape))
        return {"beta": float(beta[bi, 0]), "lambda": float(lam[0, li]), **p.as_dict()}

    report = {}
    d1 = index_delta1(p, beta, lam)
    report["delta1_negative"] = _update(_ineq_record(), -d1, sample)
    hl = 1e-6 * lam
    up, down = index_delta2(p, beta, lam + hl), index_delta2(p, beta, lam - hl)
    dd_lam = (up - down) / (2 * hl)
    floor_l = 8.0 * _EPS * np.maximum(np.abs(up), np.abs(down)) / (2 * hl)
    report["ddelta2_dlambda_negative"] = _update(_ineq_record(), -dd_lam, sample,
                                                 floors=floor_l)
    hb = 1e-6 * beta
    up, down = index_delta2(p, beta + hb, lam), index_delta2(p, beta - hb, lam)
    dd_beta = (up - down) / (2 * hb)
    floor_b = 8.0 * _EPS * np.maximum(np.abs(up), np.abs(down)) / (2 * hb)
    report["ddelta2_dbeta_positive"] = _update(_ineq_record(), dd_beta, sample,
                                               floors=floor_b)
    bb = np.asarray(beta_grid, dtype=float)
    den = bb * bb * p.alpha * p.gamma - p.mu * p.sigma
    ab_ga = (-bb * p.alpha * p.gamma * (p.sigma - p.mu)
             - p.sigma * p.mu * (p.alpha - p.gamma)) / den
    report["alpha_b_minus_gamma_a_negative"] = _update(
        _ineq_record(), -ab_ga, lambda i: {"beta": float(bb[i]), **p.as_dict()})
    return report


def verify_est_m_beta(p: Params, beta_j: float, lambda_j: float) -> dict:
    """Transversality chain at a bifurcation point (beta_j, lambda_j)."""
    resid = abs(float(neg_delta1(p, beta_j)) - lambda_j) / lambda_j
    m = float(slope_m(p, beta_j))
    ag = beta_j * beta_j * p.alpha * p.gamma + p.mu * p.sigma
    coef = ag - 2.0 * beta_j * p.mu * p.gamma
    step2 = coef * m - (ag - 2.0 * beta_j * p.alpha * p.sigma)
    H_val = float(comp_horner(_H_coeffs(p, lambda_j), beta_j))
    bound = -lambda_j / p.mu - p.sigma / (beta_j * p.gamma)
    return {
        "defining_residual": resid,
        "step2_negative": step2 < 0.0,
        "step2_value": float(step2),
        "H_negative": H_val < 0.0,
        "H_value": H_val,
        "m_below_bound": m < bound,
        "m_value": m,
        "m_bound": float(bound),
        "coef_positive": coef > 0.0,
        "coef_value": float(coef),
    }


def verify_z_sign(p: Params, points) -> dict:
    """Report-only signs of the non-degeneracy scalar and of z(beta_j).

    `points` is an iterable of (j, beta_j, lambda_j).  Near-zero values
    (relative 1e-8) are flagged; nothing here is asserted, the claims
    are generic rather than theorems.
    """
    from .params import constant_state

    entries = []
    for (j, beta_j, lambda_j) in points:
        cs = constant_state(p, beta_j)
        m = -(lambda_j + p.sigma * cs.b) / (beta_j * p.gamma * cs.b)
        nondeg = (m * (p.mu * m + beta_j * p.alpha) * (p.gamma * cs.b / (p.alpha * cs.a)) * m
                  + p.sigma + beta_j * p.gamma * m)
        scale = abs(p.sigma) + abs(beta_j * p.gamma * m)
        z_val = float(comp_horner(_z_coeffs(p, lambda_j), beta_j))
        z_scale = float(_abs_horner(_z_coeffs(p, lambda_j), beta_j))
        ident = p.sigma + beta_j * p.gamma * m + lambda_j / cs.b
        lead = lambda_j * p.alpha**2 * p.gamma**3 * (p.sigma - lambda_j)
        entries.append({
            "j": int(j),
            "beta_j": float(beta_j),
            "lambda_j": float(lambda_j),
            "nondeg_value": float(nondeg),
            "nondeg_sign": int(np.sign(nondeg)),
            "nondeg_flagged": bool(abs(nondeg) < 1e-8 * max(scale, 1.0)),
            "z_value": z_val,
            "z_sign": int(np.sign(z_val)),
            "z_flagged": bool(abs(z_val) < 1e-8 * max(z_scale, 1.0)),
            "z_leading_coeff_positive": bool(lead > 0.0),
            "slope_identity_rel_err": float(abs(ident) / (lambda_j / cs.b)),
        })
    return {"points": entries}


def _solve_beta_vec(p: Params, lams: np.ndarray, iters: int = 90) -> np.ndarray:
    """Vectorized bisection for -delta_1(beta) = lam, one root per entry."""
    lo = np.full(lams.shape, p.beta_min * (1.0 + 1e-9))
    hi = np.full(lams.shape, 2.0 * p.beta_min)
    for _ in range(400):
        mask = neg_delta1(p, hi) <= lams
        if not np.any(mask):
            break
        hi[mask] *= 2.0
    else:
        raise RuntimeError("vectorized bracketing failed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = neg_delta1(p, mid) > lams
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def _merge(total: dict, part: dict) -> None:
    for key, rec in part.items():
        if not isinstance(rec, dict) or "checked" not in rec:
            continue
        agg = total.setdefault(key, _ineq_record())
        agg["checked"] += rec["checked"]
        agg["violations"] += rec["violations"]
        if rec["worst_margin"] < agg["worst_margin"]:
            agg["worst_margin"] = rec["worst_margin"]
            agg["worst_sample"] = rec["worst_sample"]


def draw_params(rng: np.random.Generator, force_sigma_eq_mu: bool = False) -> Params:
    """Log-uniform admissible draw; sigma/mu in [1, 1e2], alpha/gamma in (1, 1e2]."""
    mu = 10.0 ** rng.uniform(-2, 2)
    sigma = mu if force_sigma_eq_mu else mu * 10.0 ** rng.uniform(0, 2)
    gamma = 10.0 ** rng.uniform(-2, 2)
    alpha = gamma * 10.0 ** rng.uniform(1e-9, 2)
    return Params(mu=mu, sigma=sigma, alpha=alpha, gamma=gamma, dim=2)


def run_appendix_sweep(seed: int = 0, draws: int = 300, betas_per_draw: int = 400,
                       lambdas_per_draw: int = 20) -> dict:
    """Random-parameter certification sweep.

    Every 4th draw pins sigma = mu exactly (the boundary of the standing
    hypothesis).  Returns a JSON-ready report with per-inequality counts,
    worst margins, and the samples achieving them.
    """
    rng = np.random.default_rng(seed)
    totals: dict = {}
    est_checked = 0
    est_viol = {"step2_negative": 0, "H_negative": 0, "m_below_bound": 0, "coef_positive": 0}
    worst_deriv = 0.0
    for d in range(draws):
        p = draw_params(rng, force_sigma_eq_mu=(d % 4 == 0))
        lo = p.beta_min * (1.0 + 1e-6)
        hi = 1e6 * p.beta_min
        beta = np.exp(rng.uniform(np.log(lo), np.log(hi), size=betas_per_draw))
        beta.sort()
        part = verify_mono_beta(p, beta)
        worst_deriv = max(worst_deriv, part.pop("derivative_formula_max_rel_err"))
        _merge(totals, part)

        lam_grid = 10.0 ** rng.uniform(0, 3, size=lambdas_per_draw)
        part = verify_mono_lambda(p, beta, lam_grid)
        _merge(totals, part)

        # H < 0 for any positive lambda below sqrt(mu*sigma), on the beta grid
        lam_h = np.sqrt(p.mu * p.sigma) * 10.0 ** rng.uniform(-4, -1e-12)
        H_val = comp_horner(_H_coeffs(p, float(lam_h)), beta)
        _merge(totals, {"H_negative": _update(
            _ineq_record(), -H_val,
            lambda i: {"beta": float(beta[i]), "lambda": float(lam_h), **p.as_dict()})})

        # est-m-beta chain at synthetic bifurcation points
        lam_pts = np.sqrt(p.mu * p.sigma) * 10.0 ** rng.uniform(-3, -1e-12, size=8)
        beta_pts = _solve_beta_vec(p, lam_pts)
        for bj, lj in zip(beta_pts, lam_pts):
            rep = verify_est_m_beta(p, float(bj), float(lj))
            est_checked += 1
            for key in est_viol:
                if not rep[key]:
                    est_viol[key] += 1
    report = {
        "seed": seed,
        "draws": draws,
        "inequalities": {
            key: {
                "checked": rec["checked"],
                "violations": rec["violations"],
                "worst_margin": rec["worst_margin"],
                "worst_sample": rec["worst_sample"],
            } for key, rec in sorted(totals.items())
        },
        "est_m_beta": {"points": est_checked, "violations": est_viol},
        "derivative_formula_max_rel_err": worst_deriv,
    }
    report["theorem_violations"] = int(
        sum(rec["violations"] for rec in totals.values()) + sum(est_viol.values()))
    return report
