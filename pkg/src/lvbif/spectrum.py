"""Radial Neumann Laplacian on the unit ball: grid, operator, eigenpairs.

Finite-volume discretization of -(r^{N-1} u')'/r^{N-1} on a uniform grid
whose first node sits at h/2 (no division by r=0) and whose last node is
exactly 1.  Fluxes vanish at both boundary faces, which builds the
Neumann conditions u'(0) = u'(1) = 0 into the stencil and keeps the
operator symmetric in the weighted inner product.

An independent oracle cross-checks the eigenvalues: the radial
eigenfunctions are r^{1-N/2} J_{N/2-1}(sqrt(lambda) r), and the Neumann
condition at r=1 reduces to J_{N/2}(sqrt(lambda)) = 0, a scalar
root-finding problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma as gamma_fn
from math import pi

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq
from scipy.special import jv


def ball_volume(dim: int) -> float:
    """|B_1| in dimension dim: pi^(N/2) / Gamma(N/2 + 1)."""
    return pi ** (dim / 2.0) / gamma_fn(dim / 2.0 + 1.0)


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return dim * ball_volume(dim)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid on (0, 1] with cell faces and quadrature weights.

    weights are scaled by the sphere-area constant so that
    sum(weights) = |B_1| and sum(weights * f(r)) approximates the ball
    integral of a radial function f.
    """

    dim: int
    n: int
    r: np.ndarray
    faces: np.ndarray
    weights: np.ndarray
    h: float

    def integrate(self, f: np.ndarray) -> float:
        return float(self.weights @ f)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.weights @ (f * g))


def build_grid(dim: int, n: int) -> RadialGrid:
    """Grid with nodes (i + 1/2)*h, h = 2/(2n - 1), so r[0] = h/2, r[-1] = 1."""
    if n < 16:
        raise ValueError(f"grid needs n >= 16 nodes, got {n}")
    if dim < 2:
        raise ValueError(f"dim >= 2 required, got {dim}")
    h = 2.0 / (2 * n - 1)
    r = (np.arange(n) + 0.5) * h
    faces = np.arange(n + 1) * h
    faces[-1] = 1.0  # right boundary face; last cell is the half cell [1 - h/2, 1]
    weights = ball_volume(dim) * (faces[1:] ** dim - faces[:-1] ** dim)
    return RadialGrid(dim=dim, n=n, r=r, faces=faces, weights=weights, h=h)


@dataclass(frozen=True)
class DiscreteOperator:
    """Discrete -Lap_r with Neumann ends, in flux and banded form.

    `apply` works in flux form (differences of face fluxes), so constant
    fields map to exactly zero.  `main`/`lower`/`upper` give the same
    operator as a tridiagonal matrix for linear-system assembly, and
    `sym_main`/`sym_off` its symmetric similarity transform for
    eigenvalue solves.
    """

    grid: RadialGrid
    trans: np.ndarray  # interior face transmissibilities c, length n-1
    vol: np.ndarray    # unscaled cell volumes, length n
    main: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sym_main: np.ndarray
    sym_off: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        flux = self.trans * np.diff(u)
        out = np.zeros_like(u)
        out[:-1] -= flux   # (flux_left - flux_right)/vol, boundary fluxes zero
        out[1:] += flux
        out /= self.vol
        return out

    def quadratic_form(self, u: np.ndarray) -> float:
        """Discrete Dirichlet form = weighted <A u, u> = H^1 seminorm squared."""
        du = np.diff(u)
        return float(sphere_area(self.grid.dim) * np.sum(self.trans * du * du))


def assemble_neumann_laplacian(grid: RadialGrid) -> DiscreteOperator:
    dim = grid.dim
    h = grid.h
    faces = grid.faces
    vol = (faces[1:] ** dim - faces[:-1] ** dim) / dim
    c = faces[1:-1] ** (dim - 1) / h  # interior face transmissibilities; boundary fluxes are zero
    main = np.zeros(grid.n)
    main[:-1] += c
    main[1:] += c
    main /= vol
    upper = -c / vol[:-1]
    lower = -c / vol[1:]
    sym_off = -c / np.sqrt(vol[:-1] * vol[1:])
    return DiscreteOperator(
        grid=grid, trans=c, vol=vol, main=main, lower=lower, upper=upper,
        sym_main=main.copy(), sym_off=sym_off,
    )


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue lambda_j with eigenfunction normalized to max|f| = 1, f(r[0]) > 0."""

    j: int
    lam: float
    f: np.ndarray


def count_sign_changes(f: np.ndarray, tol_rel: float = 1e-8) -> int:
    """Strict sign changes of a grid function, ignoring |f| below tol_rel*max|f|."""
    scale = float(np.max(np.abs(f)))
    if scale == 0.0:
        return 0
    mask = np.abs(f) > tol_rel * scale
    signs = np.sign(f[mask])
    return int(np.sum(signs[1:] != signs[:-1]))


def eigenpairs(op: DiscreteOperator, grid: RadialGrid, k: int) -> list[EigenPair]:
    """First k+1 eigenpairs (j = 0..k) of the discrete operator, ascending.

    Eigensolve: bisection on the Sturm sequence of the symmetric
    tridiagonal similarity plus inverse iteration (LAPACK stebz/stein).
    The nodal invariant (f_j has exactly j sign changes) is enforced.
    """
    if k < 1:
        raise ValueError("k >= 1 required")
    if k >= grid.n - 1:
        raise ValueError(f"k={k} too large for n={grid.n}")
    vals, vecs = eigh_tridiagonal(
        op.sym_main, op.sym_off, select="i", select_range=(0, k),
        lapack_driver="stebz",
    )
    vol = grid.weights / sphere_area(grid.dim)
    pairs = []
    for j in range(k + 1):
        f = vecs[:, j] / np.sqrt(vol)
        f = f / np.max(np.abs(f))
        if f[0] < 0:
            f = -f
        res = float(np.max(np.abs(op.apply(f) - vals[j] * f)))
        if res > 1e-8 * max(abs(vals[j]), 1.0):
            raise RuntimeError(
                f"eigen solve did not converge for j={j}: residual {res:.3e}"
            )
        changes = count_sign_changes(f)
        if changes != j:
            raise RuntimeError(
                f"nodal invariant violated: mode {j} has {changes} sign changes"
            )
        pairs.append(EigenPair(j=j, lam=float(vals[j]), f=f))
    return pairs


def bessel_oracle(dim: int, j: int) -> float:
    """Reference lambda_j from the j-th positive zero of J_{N/2}.

    Bracketed root-finding on the Bessel function; accurate to full
    double precision (>= 10 significant digits).  j = 0 returns 0.
    """
    if j == 0:
        return 0.0
    nu = dim / 2.0
    fun = lambda x: jv(nu, x)
    roots = []
    step = 0.05
    x = 1e-9
    fx = fun(x)
    # zeros of J_nu are separated by > pi/2 for these orders; a 0.05 scan cannot skip one
    while len(roots) < j:
        x2 = x + step
        fx2 = fun(x2)
        if fx * fx2 < 0.0:
            roots.append(brentq(fun, x, x2, xtol=1e-15, rtol=8.9e-16))
        elif fx2 == 0.0:
            roots.append(x2)
        x, fx = x2, fx2
        if x > 1e4:
            raise RuntimeError(f"bracketing failed for dim={dim}, j={j}")
    return roots[j - 1] ** 2


def export_eigenpairs_csv(path, pairs: list[EigenPair], grid: RadialGrid, params_line: str = "") -> None:
    """CSV with columns j, lambda, then grid values; header embeds N and n."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        meta = f"# dim={grid.dim} n={grid.n}"
        if params_line:
            meta += " " + params_line
        fh.write(meta + "\n")
        cols = ",".join(f"f_r{i}" for i in range(grid.n))
        fh.write(f"j,lambda,{cols}\n")
        for pair in pairs:
            vals = ",".join(format(v, ".17g") for v in pair.f)
            fh.write(f"{pair.j},{format(pair.lam, '.17g')},{vals}\n")
