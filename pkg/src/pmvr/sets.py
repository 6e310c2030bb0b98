"""Closed convex feasible sets: simplex, box, nuclear-norm ball.

Each set exposes the four operations the solvers and metrics need:

* ``lmo(d)``       -- a minimizer of <x, d> over the set,
* ``project(p)``   -- the Euclidean-nearest feasible point,
* ``contains(p)``  -- membership up to a tolerance,
* ``diameter``     -- max pairwise Euclidean/Frobenius distance.

The nuclear-ball LMO needs only the top singular pair (computed here by
power iteration); its projection needs a full SVD, which is acceptable
because projection sits on the metric path, not the solver's hot path.
"""

from __future__ import annotations

import numpy as np

from .core import ShapeMismatchError
from .rng import generator_for


class PowerIterationError(RuntimeError):
    """Raised when the power iteration fails to reach tolerance.

    Carries the best residual seen so the caller can inspect how close
    the iteration got.
    """

    def __init__(self, message, best_residual):
        super().__init__(message)
        self.best_residual = best_residual


def project_simplex(p, total=1.0):
    """Euclidean projection onto {x >= 0, sum(x) = total} by sort-and-threshold."""
    p = np.asarray(p, dtype=np.float64)
    d = p.size
    u = np.sort(p)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, d + 1)
    cond = u - css / ks > 0
    rho = np.nonzero(cond)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(p - theta, 0.0)


def top_singular_pair(matrix, tol=1e-8, max_iter=1000, rng=None, block=5,
                      warm=None):
    """Dominant singular triple (sigma1, u1, v1) of a nonzero matrix.

    Block power iteration on the squared Gram operator of the smaller side,
    with the leading Ritz pair extracted each sweep. The block resolves
    near-ties among the top singular values that stall the single-vector
    method; inputs whose top ``block`` values are all nearly tied may still
    exhaust ``max_iter``, which is surfaced as an error.

    Convergence is certified on the returned pair by the residuals
    ||M v - sigma u|| <= tol*sigma (zero by construction of the Ritz pair)
    and ||M^T u - sigma v|| <= tol*sigma. The start block comes from ``rng``
    when given, otherwise a fixed pseudo-random direction, so replays are
    exact either way. ``warm`` is an optional dict carrying the converged
    block between calls on nearby matrices (the quadratic subsolver's inner
    loop); it is consulted and updated in place.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D matrix, got shape {m.shape}")
    norm = np.linalg.norm(m)
    if norm == 0.0:
        raise ValueError("top_singular_pair is undefined for the zero matrix")

    rows, cols = m.shape
    transposed = rows < cols
    a = (m.T if transposed else m) / norm  # fewer columns; scaled against overflow
    n = a.shape[1]
    b = max(1, min(block, n))
    gram = a.T @ a
    gram = gram @ gram  # squared operator: twice the contraction per sweep

    block_v = None
    if warm is not None:
        prev = warm.get("block")
        if prev is not None and prev.shape == (n, b):
            block_v = prev
    if block_v is None:
        if rng is None:
            # fixed pseudo-random block: deterministic across calls, and in
            # generic position unlike structured starts
            gen = np.random.Generator(np.random.Philox(key=0x9E3779B97F4A7C15))
        else:
            gen = generator_for(rng)
        block_v, _ = np.linalg.qr(gen.standard_normal((n, b)))

    best_residual = np.inf
    for sweep in range(max_iter):
        # two applications of the squared Gram operator per orthonormalization;
        # the scaled spectrum lives in [r^-1/2, 1], so no underflow before QR
        block_v, _ = np.linalg.qr(gram @ (gram @ block_v))
        w = a @ block_v
        p, s, qt = np.linalg.svd(w, full_matrices=False)
        sigma = s[0]
        if sigma == 0.0:
            # span collapsed into the null space; restart from a fresh block
            gen = np.random.Generator(np.random.Philox(key=0xD1B54A32D192ED03 + sweep))
            block_v, _ = np.linalg.qr(gen.standard_normal((n, b)))
            continue
        u = p[:, 0]
        v = block_v @ qt[0]
        residual = np.linalg.norm(a.T @ u - sigma * v)
        best_residual = min(best_residual, residual)
        if residual <= tol * sigma:
            if warm is not None:
                warm["block"] = block_v
            if transposed:
                u, v = v, u
            return float(sigma * norm), u, v
    raise PowerIterationError(
        f"power iteration did not reach tol={tol} within {max_iter} iterations "
        f"(best residual {best_residual:.3e})",
        best_residual,
    )


class FeasibleSet:
    """Common interface; concrete sets fill in the four operations."""

    diameter = None

    def _check_shape(self, p):
        p = np.asarray(p, dtype=np.float64)
        if p.shape != self.shape:
            raise ShapeMismatchError(
                f"point shape {p.shape} does not match set shape {self.shape}"
            )
        return p

    def lmo(self, direction, rng=None, warm=None):
        raise NotImplementedError

    def project(self, point):
        raise NotImplementedError

    def contains(self, point, tol=1e-9):
        raise NotImplementedError


class Simplex(FeasibleSet):
    """Probability simplex {x >= 0, sum(x) = 1} in R^d."""

    def __init__(self, d):
        if d < 1:
            raise ValueError("simplex dimension must be >= 1")
        self.d = int(d)
        self.shape = (self.d,)
        self.diameter = np.sqrt(2.0) if d > 1 else 0.0

    def lmo(self, direction, rng=None, warm=None):
        # vertex at the minimal coordinate; argmin breaks ties to the lowest index
        d = self._check_shape(direction)
        out = np.zeros(self.d)
        out[int(np.argmin(d))] = 1.0
        return out

    def project(self, point):
        return project_simplex(self._check_shape(point))

    def contains(self, point, tol=1e-9):
        p = self._check_shape(point)
        return bool(abs(p.sum() - 1.0) <= tol and p.min() >= -tol)


class Box(FeasibleSet):
    """Axis-aligned box {lower <= x <= upper}."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=np.float64)
        self.upper = np.asarray(upper, dtype=np.float64)
        if self.lower.shape != self.upper.shape:
            raise ShapeMismatchError("lower and upper bounds must share a shape")
        if np.any(self.lower > self.upper):
            raise ValueError("box requires lower <= upper coordinatewise")
        self.shape = self.lower.shape
        self.diameter = float(np.linalg.norm(self.upper - self.lower))

    def lmo(self, direction, rng=None, warm=None):
        d = self._check_shape(direction)
        return np.where(d > 0, self.lower, self.upper)

    def project(self, point):
        return np.clip(self._check_shape(point), self.lower, self.upper)

    def contains(self, point, tol=1e-9):
        p = self._check_shape(point)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))


class NuclearNormBall(FeasibleSet):
    """Matrices in R^{m x n} with nuclear norm at most ``radius``."""

    def __init__(self, m, n, radius, power_tol=1e-8, power_max_iter=1000):
        if m < 1 or n < 1:
            raise ValueError("matrix dimensions must be >= 1")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.m, self.n = int(m), int(n)
        self.radius = float(radius)
        self.shape = (self.m, self.n)
        self.diameter = 2.0 * self.radius
        self.power_tol = power_tol
        self.power_max_iter = power_max_iter

    def lmo(self, direction, rng=None, warm=None):
        d = self._check_shape(direction)
        if np.linalg.norm(d) == 0.0:
            # every feasible point is optimal against the zero direction
            return np.zeros(self.shape)
        sigma, u, v = top_singular_pair(
            d, tol=self.power_tol, max_iter=self.power_max_iter, rng=rng, warm=warm
        )
        u = u / np.linalg.norm(u)
        v = v / np.linalg.norm(v)
        return -self.radius * np.outer(u, v)

    def project(self, point):
        p = self._check_shape(point)
        u, sig, vt = np.linalg.svd(p, full_matrices=False)
        if sig.sum() <= self.radius:
            return p
        # singular values are nonnegative and sorted, so the ball projection
        # lands on the boundary face {sum = radius}
        sig_proj = project_simplex(sig, total=self.radius)
        return (u * sig_proj) @ vt

    def contains(self, point, tol=1e-9):
        p = self._check_shape(point)
        sig = np.linalg.svd(p, compute_uv=False)
        return bool(sig.sum() <= self.radius + tol)
