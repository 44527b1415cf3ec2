"""Self-contained dense complex linear algebra and root finding.

Everything downstream (Lax matrices, tau determinants, resolvent traces)
funnels through the four kernels in this module:

* ``lu_det_solve``  -- LU with partial pivoting, determinant + solve in one pass
* ``mat_exp``       -- scaling-and-squaring with a degree-13 Pade approximant
* ``poly_roots``    -- Aberth-Ehrlich simultaneous iteration with warm starts
* ``contour_residue_at_infinity`` / ``contour_residue_at_zero`` -- trapezoidal
  circle quadrature under the convention res(z^-n) = delta_{n,1}

Matrices are plain ``numpy`` complex arrays; no eigensolvers are used anywhere
(the Lax matrices are non-normal and the root tracking wants warm starts).
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, Overflow, SingularMatrix

# Pivot threshold: a pivot smaller than this times the max row norm of the
# input is treated as an exact zero.
PIVOT_RTOL = 1e-14

# Degree-13 Pade coefficients and the 1-norm threshold below which the
# unscaled approximant meets double precision (Higham 2005).
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


def as_square_matrix(a) -> np.ndarray:
    """Validate and return ``a`` as a finite square complex matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def lu_det_solve(a, b=None):
    """LU-factor ``a`` with partial pivoting; return ``(det, x)``.

    ``x`` solves ``a @ x = b`` (``b`` may be a vector or a matrix of columns)
    and is ``None`` when ``b`` is ``None``.  Raises ``SingularMatrix`` when a
    pivot falls below ``PIVOT_RTOL`` times the largest row sum of ``a``.
    """
    a = as_square_matrix(a)
    n = a.shape[0]
    lu = a.copy()
    scale = max(np.abs(lu).sum(axis=1).max(), 1e-300)
    det = 1.0 + 0.0j
    perm = np.arange(n)
    for k in range(n):
        piv = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[piv, k]) < PIVOT_RTOL * scale:
            raise SingularMatrix(
                f"pivot {abs(lu[piv, k]):.3e} below {PIVOT_RTOL:.0e} * row scale {scale:.3e}"
            )
        if piv != k:
            lu[[k, piv]] = lu[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
            det = -det
        det *= lu[k, k]
        if k + 1 < n:
            lu[k + 1 :, k] /= lu[k, k]
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    if b is None:
        return det, None
    rhs = np.asarray(b, dtype=complex)
    vector_rhs = rhs.ndim == 1
    if vector_rhs:
        rhs = rhs[:, None]
    if rhs.shape[0] != n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {n}")
    x = rhs[perm].astype(complex)
    for k in range(1, n):  # forward substitution, unit lower triangle
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):  # back substitution
        x[k] -= lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= lu[k, k]
    return det, (x[:, 0] if vector_rhs else x)


def det(a) -> complex:
    """Determinant via ``lu_det_solve``."""
    d, _ = lu_det_solve(a)
    return d


def solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` via ``lu_det_solve``."""
    _, x = lu_det_solve(a, b)
    return x


def inv(a) -> np.ndarray:
    """Matrix inverse via ``lu_det_solve`` against the identity."""
    a = as_square_matrix(a)
    return solve(a, np.eye(a.shape[0], dtype=complex))


def condition_estimate(a) -> float:
    """1-norm condition number; ``inf`` when the matrix is singular."""
    a = as_square_matrix(a)
    norm1 = np.abs(a).sum(axis=0).max()
    try:
        norm1_inv = np.abs(inv(a)).sum(axis=0).max()
    except SingularMatrix:
        return float("inf")
    return float(norm1 * norm1_inv)


def mat_exp(a) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with the Pade-13 kernel.

    Accurate to ~1e-13 relative for moderate norms; eigendecomposition is
    deliberately avoided since the inputs may be badly non-normal.  Raises
    ``Overflow`` when the result leaves double range.
    """
    a = as_square_matrix(a)
    n = a.shape[0]
    norm1 = np.abs(a).sum(axis=0).max() if n else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm1 / _THETA13))) if norm1 > _THETA13 else 0)
    sa = a / (2.0**squarings)
    b = _PADE13
    ident = np.eye(n, dtype=complex)
    a2 = sa @ sa
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = sa @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    f = solve(v - u, v + u)
    for _ in range(squarings):
        f = f @ f
    if not np.all(np.isfinite(f)):
        raise Overflow("matrix exponential overflowed double range")
    return f


@dataclass(frozen=True)
class ComplexPolynomial:
    """Monic polynomial, coefficients in descending powers (numpy order)."""

    coefficients: np.ndarray = field()

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        if c.ndim != 1 or c.size < 2:
            raise ValueError("need at least degree 1")
        if c[0] == 0:
            raise ValueError("leading coefficient must be nonzero")
        object.__setattr__(self, "coefficients", c / c[0])

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, w):
        return polyval(self.coefficients, w)


def polyval(coeffs, w):
    """Horner evaluation; ``coeffs`` descending, ``w`` scalar or array."""
    w = np.asarray(w, dtype=complex)
    out = np.full(w.shape, coeffs[0], dtype=complex)
    for c in coeffs[1:]:
        out = out * w + c
    return out[()] if out.ndim == 0 else out


def poly_from_roots(roots) -> np.ndarray:
    """Monic coefficients (descending) of prod(w - r_i)."""
    coeffs = np.array([1.0 + 0.0j])
    for r in np.asarray(roots, dtype=complex):
        coeffs = np.concatenate([coeffs, [0.0]]) - r * np.concatenate([[0.0], coeffs])
    return coeffs


def poly_roots(p, warm_start=None, tol=1e-12, max_iter=500) -> np.ndarray:
    """All roots of a monic polynomial by Aberth-Ehrlich iteration.

    ``p`` is a ``ComplexPolynomial`` or a descending coefficient array with
    nonzero leading coefficient.  ``warm_start`` (length = degree) seeds the
    iteration, which is what makes root tracking along a time path cheap and
    continuous.  Raises ``NoConvergence`` after ``max_iter`` sweeps; that is
    the designed signal for clustered or colliding roots.
    """
    coeffs = p.coefficients if isinstance(p, ComplexPolynomial) else np.asarray(p, dtype=complex)
    if coeffs[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    coeffs = coeffs / coeffs[0]
    n = coeffs.size - 1
    if n < 1:
        raise ValueError("degree must be >= 1")
    if n == 1:
        return np.array([-coeffs[1]])
    dcoeffs = coeffs[:-1] * np.arange(n, 0, -1)

    if warm_start is not None:
        z = np.array(warm_start, dtype=complex)
        if z.size != n:
            raise ValueError(f"warm start has {z.size} entries, degree is {n}")
    else:
        # Cauchy bound circle with an irrational angular offset so the start
        # never lands on a symmetry axis of the root set.
        radius = 1.0 + np.abs(coeffs[1:]).max()
        angles = 2.0 * np.pi * np.arange(n) / n + 0.4
        z = radius * np.exp(1j * angles)

    for _ in range(max_iter):
        pv = polyval(coeffs, z)
        dv = polyval(dcoeffs, z)
        done = np.abs(pv) <= tol * np.maximum(np.abs(dv) * (1.0 + np.abs(z)), 1e-300)
        if np.all(done):
            return z
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv_diff = 1.0 / diff
        np.fill_diagonal(inv_diff, 0.0)
        repulsion = inv_diff.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = np.where(dv != 0, pv / np.where(dv != 0, dv, 1.0), 0.0)
            denom = 1.0 - newton * repulsion
            step = np.where(np.abs(denom) > 1e-300, newton / denom, newton)
        z = z - np.where(done, 0.0, step)
        if not np.all(np.isfinite(z)):
            raise NoConvergence("Aberth iteration diverged (non-finite iterate)")
        # simple roots stagnate at the rounding floor of p; accept that too
        if np.all(done | (np.abs(step) <= 1e-15 * (1.0 + np.abs(z)))):
            return z
    raise NoConvergence(
        f"Aberth iteration did not converge in {max_iter} sweeps; "
        "roots are likely clustered -- reduce the time step"
    )


def contour_residue_at_infinity(f, m=0, radius=2.0, nodes=256):
    """res_inf(z^m f(z)) by the trapezoidal rule on |z| = radius.

    Convention res_inf(z^-n) = delta_{n,1}, i.e. the plain (1/2 pi i) circle
    integral.  ``f`` must be analytic outside the circle and decay at
    infinity; accuracy then improves geometrically with ``nodes``.  ``f`` may
    return arrays (componentwise residues).
    """
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = radius * np.exp(1j * theta)
    acc = None
    for zj in z:
        term = np.asarray(f(zj), dtype=complex) * zj ** (m + 1)
        acc = term if acc is None else acc + term
    acc = acc / nodes
    return acc[()] if acc.ndim == 0 else acc


def contour_residue_at_zero(f, m=0, radius=0.5, nodes=256):
    """res_0(z^m f(z)) on a small circle enclosing only the origin.

    Same convention and quadrature as ``contour_residue_at_infinity``;
    ``radius`` must stay inside every other singularity of ``f``.
    """
    return contour_residue_at_infinity(f, m=m, radius=radius, nodes=nodes)
