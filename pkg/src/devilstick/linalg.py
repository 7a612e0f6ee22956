"""Small dense linear-algebra kernels.

Everything here operates on matrices of order ~5, so the implementations
favor transparency and exact, documented failure modes over speed. numpy
arrays are used as containers only; the algorithms (pivoted elimination,
Hessenberg reduction, shifted QR, Riccati fixed-point iteration) are
written out explicitly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NoConvergenceError,
    NotStabilizableError,
    SingularMatrixError,
)

PIVOT_FLOOR = 1e-12


def _as_square(a) -> np.ndarray:
    m = np.array(a, dtype=float, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def solve_linear(a, b) -> np.ndarray:
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError when the best available pivot falls below
    PIVOT_FLOOR in magnitude. b may be a vector or a matrix of stacked
    right-hand sides.
    """
    m = _as_square(a)
    n = m.shape[0]
    rhs = np.array(b, dtype=float, copy=True)
    vector_input = rhs.ndim == 1
    if vector_input:
        rhs = rhs.reshape(n, 1)
    if rhs.shape[0] != n:
        raise ValueError("right-hand side length does not match the matrix")

    for col in range(n):
        pivot_row = col
        best = abs(m[col, col])
        for r in range(col + 1, n):
            mag = abs(m[r, col])
            if mag > best:
                best = mag
                pivot_row = r
        if best < PIVOT_FLOOR:
            raise SingularMatrixError(
                f"pivot {best:.3e} below {PIVOT_FLOOR:.0e} at column {col}"
            )
        if pivot_row != col:
            m[[col, pivot_row]] = m[[pivot_row, col]]
            rhs[[col, pivot_row]] = rhs[[pivot_row, col]]
        inv_pivot = 1.0 / m[col, col]
        for r in range(col + 1, n):
            factor = m[r, col] * inv_pivot
            if factor != 0.0:
                m[r, col:] -= factor * m[col, col:]
                rhs[r] -= factor * rhs[col]

    x = np.zeros_like(rhs)
    for row in range(n - 1, -1, -1):
        acc = rhs[row] - m[row, row + 1:] @ x[row + 1:]
        x[row] = acc / m[row, row]
    return x[:, 0] if vector_input else x


def determinant(a) -> float:
    """Determinant via the same pivoted elimination as solve_linear."""
    m = _as_square(a)
    n = m.shape[0]
    sign = 1.0
    det = 1.0
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(m[r, col]))
        if abs(m[pivot_row, col]) == 0.0:
            return 0.0
        if pivot_row != col:
            m[[col, pivot_row]] = m[[pivot_row, col]]
            sign = -sign
        det *= m[col, col]
        inv_pivot = 1.0 / m[col, col]
        for r in range(col + 1, n):
            factor = m[r, col] * inv_pivot
            if factor != 0.0:
                m[r, col:] -= factor * m[col, col:]
    return sign * det


def _hessenberg(h: np.ndarray) -> np.ndarray:
    """Reduce to upper Hessenberg form in place via Householder reflections."""
    n = h.shape[0]
    for col in range(n - 2):
        x = h[col + 1:, col]
        norm_x = math.sqrt(float(np.sum(np.abs(x) ** 2)))
        if norm_x == 0.0:
            continue
        pivot = x[0]
        phase = pivot / abs(pivot) if pivot != 0 else 1.0
        v = x.copy()
        v[0] += phase * norm_x
        vnorm2 = float(np.sum(np.abs(v) ** 2))
        if vnorm2 == 0.0:
            continue
        v = v.reshape(-1, 1)
        # H = I - 2 v v* / (v* v), applied from both sides
        block = h[col + 1:, col:]
        block -= (2.0 / vnorm2) * v @ (v.conj().T @ block)
        block = h[:, col + 1:]
        block -= (2.0 / vnorm2) * (block @ v) @ v.conj().T
    for r in range(2, n):
        h[r, : r - 1] = 0.0
    return h


def _givens(f: complex, g: complex):
    """Unitary (c, s) with c real so that the rotation annihilates g."""
    if g == 0:
        return 1.0, 0.0 + 0.0j
    if f == 0:
        return 0.0, g.conjugate() / abs(g)
    d = math.hypot(abs(f), abs(g))
    c = abs(f) / d
    s = (f / abs(f)) * g.conjugate() / d
    return c, s


def _wilkinson_shift(h: np.ndarray, hi: int) -> complex:
    a = h[hi - 1, hi - 1]
    b = h[hi - 1, hi]
    c = h[hi, hi - 1]
    d = h[hi, hi]
    disc = cmath.sqrt(((a - d) * 0.5) ** 2 + b * c)
    mid = (a + d) * 0.5
    lam1 = mid + disc
    lam2 = mid - disc
    return lam1 if abs(lam1 - d) <= abs(lam2 - d) else lam2


def eigenvalues_dense(a, max_sweeps: int | None = None) -> np.ndarray:
    """All eigenvalues of a real square matrix.

    Hessenberg reduction followed by shifted QR iteration in complex
    arithmetic. The sweep budget is 100 * n**2 unless overridden;
    exceeding it raises NoConvergenceError. For real input the result is
    symmetrized into exact conjugate pairs and sorted by descending
    magnitude (ties by real part, then imaginary part).
    """
    m = _as_square(a)
    n = m.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return m.astype(complex).reshape(1)
    budget = 100 * n * n if max_sweeps is None else max_sweeps

    h = _hessenberg(m.astype(complex))
    scale = max(float(np.max(np.abs(h))), 1.0)
    tol = 1e-15 * scale
    eigs: list[complex] = []
    hi = n - 1
    sweeps = 0
    while hi > 0:
        deflated = False
        for k in range(hi, 0, -1):
            if abs(h[k, k - 1]) <= tol * max(
                1.0, abs(h[k - 1, k - 1]) + abs(h[k, k])
            ):
                h[k, k - 1] = 0.0
        if h[hi, hi - 1] == 0.0:
            eigs.append(complex(h[hi, hi]))
            hi -= 1
            deflated = True
        elif hi >= 2 and h[hi - 1, hi - 2] == 0.0:
            # isolated trailing 2x2 block: closed-form eigenvalues
            blk_tr = h[hi - 1, hi - 1] + h[hi, hi]
            blk_det = (
                h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
            )
            disc = cmath.sqrt((blk_tr * 0.5) ** 2 - blk_det)
            eigs.append(blk_tr * 0.5 + disc)
            eigs.append(blk_tr * 0.5 - disc)
            hi -= 2
            deflated = True
        if deflated:
            continue

        sweeps += 1
        if sweeps > budget:
            raise NoConvergenceError(
                f"QR iteration exceeded {budget} sweeps on an order-{n} matrix"
            )
        lo = hi - 1
        while lo > 0 and h[lo, lo - 1] != 0.0:
            lo -= 1
        mu = _wilkinson_shift(h, hi)
        for i in range(lo, hi + 1):
            h[i, i] -= mu
        rotations = []
        for k in range(lo, hi):
            c, s = _givens(h[k, k], h[k + 1, k])
            rotations.append((c, s))
            for j in range(k, hi + 1):
                fk, gk = h[k, j], h[k + 1, j]
                h[k, j] = c * fk + s * gk
                h[k + 1, j] = -s.conjugate() * fk + c * gk
        for k in range(lo, hi):
            c, s = rotations[k - lo]
            top = min(k + 2, hi + 1)
            for i in range(lo, top):
                fk, gk = h[i, k], h[i, k + 1]
                h[i, k] = fk * c + gk * s.conjugate()
                h[i, k + 1] = -fk * s + gk * c
        for i in range(lo, hi + 1):
            h[i, i] += mu
    if hi == 0:
        eigs.append(complex(h[0, 0]))

    out = _pair_conjugates(np.array(eigs, dtype=complex), scale)
    order = sorted(
        range(n), key=lambda i: (-abs(out[i]), -out[i].real, -out[i].imag)
    )
    return out[order]


def _pair_conjugates(eigs: np.ndarray, scale: float) -> np.ndarray:
    """Snap near-real values to real and enforce exact conjugate pairing.

    Complex single-shift QR on a real matrix yields pairs that agree only
    to roundoff; downstream consumers rely on them being exact mirrors.
    """
    tol = 1e-8 * scale
    result = []
    pool = list(eigs)
    while pool:
        lam = pool.pop(0)
        if abs(lam.imag) <= tol:
            result.append(complex(lam.real, 0.0))
            continue
        best_j, best_d = -1, math.inf
        for j, other in enumerate(pool):
            d = abs(other - lam.conjugate())
            if d < best_d:
                best_d, best_j = d, j
        if best_j >= 0 and best_d <= 1e-6 * scale:
            other = pool.pop(best_j)
            re = 0.5 * (lam.real + other.real)
            im = 0.5 * (abs(lam.imag) + abs(other.imag))
            result.append(complex(re, im))
            result.append(complex(re, -im))
        else:
            result.append(lam)
    return np.array(result, dtype=complex)


def spectral_radius(a) -> float:
    return float(np.max(np.abs(eigenvalues_dense(a))))


@dataclass(frozen=True)
class DareSolution:
    """Stabilizing solution of a discrete algebraic Riccati equation."""

    cost_matrix: np.ndarray  # P, symmetric positive semidefinite
    gain: np.ndarray  # K with u = -K x stabilizing
    iterations: int
    residual_norm: float


def solve_dare(a, b, q, r, tol: float = 1e-12, max_iter: int = 200_000) -> DareSolution:
    """Fixed-point iteration for A' P A - P - A' P B (R + B' P B)^-1 B' P A + Q = 0.

    Starts from P = Q and iterates the Riccati recursion, symmetrizing each
    step, until the update falls below tol in max norm. Raises
    NoConvergenceError if the budget runs out and NotStabilizableError if
    the resulting gain fails to place A - B K strictly inside the unit
    circle.
    """
    amat = _as_square(a)
    n = amat.shape[0]
    bmat = np.array(b, dtype=float, copy=True)
    if bmat.ndim == 1:
        bmat = bmat.reshape(n, 1)
    qmat = _as_square(q)
    rmat = np.array(r, dtype=float, copy=True)
    if rmat.ndim == 0:
        rmat = rmat.reshape(1, 1)
    elif rmat.ndim == 1:
        rmat = np.diag(rmat)

    p = qmat.copy()
    iterations = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for iterations in range(1, max_iter + 1):
            bt_p = bmat.T @ p
            gain = solve_linear(rmat + bt_p @ bmat, bt_p @ amat)
            p_next = qmat + amat.T @ p @ (amat - bmat @ gain)
            p_next = 0.5 * (p_next + p_next.T)
            delta = float(np.max(np.abs(p_next - p)))
            p = p_next
            if not math.isfinite(delta):
                # the cost iterates blow up exactly when an unstable mode
                # cannot be reached through B
                raise NotStabilizableError(
                    "Riccati iteration diverged; no stabilizing solution exists"
                )
            if delta <= tol:
                break
        else:
            raise NoConvergenceError(
                f"Riccati iteration did not settle within {max_iter} steps"
            )

    bt_p = bmat.T @ p
    gain = solve_linear(rmat + bt_p @ bmat, bt_p @ amat)
    residual = amat.T @ p @ amat - p - (amat.T @ p @ bmat) @ gain + qmat
    residual_norm = float(np.max(np.abs(residual)))
    closed = amat - bmat @ gain
    radius = spectral_radius(closed)
    if radius >= 1.0:
        raise NotStabilizableError(
            f"closed-loop spectral radius {radius:.6f} is not inside the unit circle"
        )
    return DareSolution(
        cost_matrix=p,
        gain=np.array(gain, dtype=float),
        iterations=iterations,
        residual_norm=residual_norm,
    )


def finite_difference_column(f, x, index: int, eps: float, f0=None) -> np.ndarray:
    """Forward-difference directional derivative (f(x + eps e_i) - f0) / eps.

    f0 defaults to f(x); pass it explicitly when the base value is already
    known (or is pinned, as with a fixed point of a return map).
    """
    base = np.array(f(x) if f0 is None else f0, dtype=float)
    xp = np.array(x, dtype=float, copy=True)
    xp[index] += eps
    return (np.array(f(xp), dtype=float) - base) / eps
