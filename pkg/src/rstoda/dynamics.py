"""Trigonometric Ruijsenaars-Schneider model: matrices, Hamiltonians, identities.

Conventions
-----------
* ``q = exp(2 gamma eta)``; ``w_i = exp(2 gamma x_i)``; ``x_ij = x_i - x_j``.
* ``lax_matrix`` returns the hyperbolic form
  ``L_ij = gamma * xdot_i / sinh(gamma (x_ij - eta))`` (equivalently the
  momentum form with ``exp(eta p_i)`` spelled out).  The Hamiltonians are
  ``H_m = -(sinh(m gamma eta)/(m gamma eta)) tr L^m`` with negative ``m``
  addressing the negative flows through ``L^-m``.
* ``gauge_lax_matrix`` returns the similarity-equivalent form
  ``2 gamma q^(1/2) xdot_i sqrt(w_i w_j) / (w_i - q w_j)`` built with the
  principal square roots of ``w_i`` (fixed once per state evaluation).  This
  is the form entering the rank-1 commutation relation and the tau-function
  machinery.  Only gauge-invariant quantities (traces, determinants, residual
  norms) should be reported.

States with nearly colliding or q-resonant particles are rejected with
``CollisionSingularity``; no regularization is attempted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import (
    CollisionSingularity,
    DegenerateNodes,
    SingularLax,
    SingularMatrix,
    ZeroVelocity,
)


@dataclass(frozen=True)
class ModelParams:
    """Couplings and particle count; ``q`` is derived, never stored."""

    gamma: complex
    eta: complex
    n: int
    m_max: int = 6
    eps_coll: float = 1e-8

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("particle count must be >= 1")
        ge = complex(self.gamma) * complex(self.eta)
        if abs(np.sinh(ge)) < 1e-12:
            raise ValueError("gamma*eta too close to i*pi*Z: sinh(gamma eta) ~ 0")
        q = np.exp(2.0 * ge)
        for m in range(1, self.m_max + 1):
            if abs(q**m - 1.0) < 1e-10 or abs(q**-m - 1.0) < 1e-10:
                raise ValueError(f"degenerate coupling: q^{m} ~ 1")

    @property
    def q(self) -> complex:
        return complex(np.exp(2.0 * complex(self.gamma) * complex(self.eta)))

    def kappa(self, m: int) -> complex:
        """kappa_m = sinh(m gamma eta)/(m gamma eta); even in m."""
        mge = m * complex(self.gamma) * complex(self.eta)
        return complex(np.sinh(mge) / mge)


@dataclass(frozen=True)
class PhaseState:
    """Canonical coordinates: complex positions ``x`` and momenta ``p``."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=complex))
        p = np.atleast_1d(np.asarray(self.p, dtype=complex))
        if x.shape != p.shape or x.ndim != 1:
            raise ValueError("x and p must be 1-d arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.x.size


def _xdiff(x: np.ndarray) -> np.ndarray:
    return x[:, None] - x[None, :]


def _coth(z: np.ndarray) -> np.ndarray:
    return np.cosh(z) / np.sinh(z)


def separation_margin(params: ModelParams, state: PhaseState) -> float:
    """Smallest |sinh| separation over pairs, 0-shifted and eta-shifted."""
    g = params.gamma
    d = _xdiff(state.x)
    off = ~np.eye(state.n, dtype=bool)
    margins = [np.abs(np.sinh(g * (d + s)))[off] for s in (0.0, params.eta, -params.eta)]
    return float(min(m.min() for m in margins)) if state.n > 1 else float("inf")


def validate_state(params: ModelParams, state: PhaseState, eps: float | None = None) -> None:
    """Raise ``CollisionSingularity`` if the separation invariants fail.

    Also rejects coordinates so large that ``sinh``/``exp`` would overflow;
    the flow integrator relies on this to discard wild trial steps.
    """
    if state.n != params.n:
        raise ValueError(f"state has {state.n} particles, params expect {params.n}")
    eps = params.eps_coll if eps is None else eps
    if not np.all(np.isfinite(state.x)) or not np.all(np.isfinite(state.p)):
        raise CollisionSingularity("non-finite phase-space coordinates")
    overflow_arg = max(
        np.abs(np.real(params.gamma * state.x)).max(),
        np.abs(np.real(params.eta * state.p)).max(),
    )
    if overflow_arg > 200.0:
        raise CollisionSingularity("coordinates outside representable trigonometric range")
    if state.n == 1:
        return
    margin = separation_margin(params, state)
    if margin < eps:
        raise CollisionSingularity(
            f"min |sinh(gamma(x_i-x_j(+-eta)))| = {margin:.3e} < eps_coll = {eps:.1e}"
        )
    w = np.exp(2.0 * params.gamma * state.x)
    q = params.q
    for shift in (q, 1.0 / q):
        gap = np.abs(w[:, None] - shift * w[None, :]) - params.eps_coll * np.abs(w)[:, None]
        off = ~np.eye(state.n, dtype=bool)
        if np.any(gap[off] < 0):
            raise CollisionSingularity("w_i too close to q^(+-1) w_j")


def is_valid_state(params: ModelParams, state: PhaseState, eps: float | None = None) -> bool:
    try:
        validate_state(params, state, eps)
    except CollisionSingularity:
        return False
    return True


def _interaction_rowprod(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """prod_{l != i} sinh(gamma(x_il + eta)) / sinh(gamma x_il), rowwise."""
    g, eta = params.gamma, params.eta
    d = _xdiff(x)
    num = np.sinh(g * (d + eta))
    den = np.sinh(g * d)
    if np.any(np.abs(den[~np.eye(x.size, dtype=bool)]) < params.eps_coll):
        raise CollisionSingularity("coincident particles in interaction product")
    ratio = np.where(np.eye(x.size, dtype=bool), 1.0, num / np.where(den == 0, 1.0, den))
    return np.prod(ratio, axis=1)


def velocity_map(params: ModelParams, state: PhaseState) -> np.ndarray:
    """Velocities xdot_i = eta e^{eta p_i} prod_{k != i} sinh ratios."""
    validate_state(params, state)
    return params.eta * np.exp(params.eta * state.p) * _interaction_rowprod(params, state.x)


def momenta_from_velocities(params: ModelParams, x, xdot) -> np.ndarray:
    """Invert ``velocity_map`` using the principal logarithm per factor."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    xdot = np.atleast_1d(np.asarray(xdot, dtype=complex))
    if np.any(xdot == 0):
        raise ZeroVelocity("cannot take log of a vanishing velocity")
    g, eta = params.gamma, params.eta
    d = _xdiff(x)
    ratio = np.where(
        np.eye(x.size, dtype=bool), 1.0, np.sinh(g * (d + eta)) / np.sinh(g * d)
    )
    logsum = np.sum(np.log(ratio), axis=1)
    return (np.log(xdot) - logsum - np.log(eta)) / eta


def lax_matrix(params: ModelParams, state: PhaseState, form: str = "momentum") -> np.ndarray:
    """Lax matrix L_ij = gamma xdot_i / sinh(gamma(x_ij - eta)).

    ``form='momentum'`` spells out xdot from the momenta; ``form='velocity'``
    routes through ``velocity_map``.  The two agree to rounding and the tests
    hold them to 1e-13.
    """
    validate_state(params, state)
    g, eta = params.gamma, params.eta
    denom = np.sinh(g * (_xdiff(state.x) - eta))
    if np.any(np.abs(denom) < params.eps_coll):
        raise CollisionSingularity("eta-shifted particle collision in Lax matrix")
    if form == "momentum":
        numer = g * eta * np.exp(eta * state.p) * _interaction_rowprod(params, state.x)
    elif form == "velocity":
        numer = g * velocity_map(params, state)
    else:
        raise ValueError(f"unknown form {form!r}")
    return numer[:, None] / denom


def state_w(params: ModelParams, state: PhaseState) -> np.ndarray:
    return np.exp(2.0 * params.gamma * state.x)


def gauge_lax_matrix(params: ModelParams, state: PhaseState, xdot=None) -> np.ndarray:
    """Gauge form 2 gamma q^(1/2) xdot_i sqrt(w_i w_j)/(w_i - q w_j).

    Similar to ``lax_matrix`` by conjugation with diagonal signs; this is the
    form satisfying the rank-1 commutation relation with the all-ones matrix.
    ``xdot`` defaults to ``velocity_map`` but may be any diagonal data (the
    negative-flow Lax matrix uses the tbar_1 velocities here).
    """
    if xdot is None:
        xdot = velocity_map(params, state)
    w = state_w(params, state)
    sw = np.sqrt(w)
    q = params.q
    denom = w[:, None] - q * w[None, :]
    if np.any(np.abs(denom) < params.eps_coll * np.abs(w).max()):
        raise CollisionSingularity("q-resonant pair in gauge Lax matrix")
    return 2.0 * params.gamma * np.sqrt(q) * xdot[:, None] * np.outer(sw, sw) / denom


def commutation_residual(params: ModelParams, state: PhaseState) -> float:
    """Relative residual of q^(-1/2) W L - q^(1/2) L W = W^(-1/2) Wdot E W^(1/2)."""
    w = state_w(params, state)
    sw = np.sqrt(w)
    xdot = velocity_map(params, state)
    wdot = 2.0 * params.gamma * w * xdot
    lg = gauge_lax_matrix(params, state, xdot)
    q = params.q
    lhs = q ** (-0.5) * w[:, None] * lg - q**0.5 * lg * w[None, :]
    rhs = np.outer(wdot / sw, sw)
    scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1e-300)
    return float(np.abs(lhs - rhs).max() / scale)


def lax_pair_matrices(params: ModelParams, state: PhaseState):
    """Return (M, Mtilde, Mprime).

    ``Mprime`` pairs with ``lax_matrix`` in dL/dt + [L, Mprime] = 0; ``M`` and
    ``Mtilde`` generate the t_1 evolution of the wave coefficient vectors and
    pair with ``gauge_lax_matrix`` (same square-root convention).
    """
    validate_state(params, state)
    g, eta, q = params.gamma, params.eta, params.q
    n = state.n
    x = state.x
    xdot = velocity_map(params, state)
    d = _xdiff(x)
    off = ~np.eye(n, dtype=bool)

    coth0 = np.zeros((n, n), dtype=complex)
    coth0[off] = _coth(g * d[off])
    coth_p = _coth(g * (d + eta))

    diag = g * ((coth0 * xdot[None, :]).sum(axis=1) - (coth_p * xdot[None, :]).sum(axis=1))

    sinh0 = np.where(np.eye(n, dtype=bool), 1.0, np.sinh(g * d))
    m_prime = np.zeros((n, n), dtype=complex)
    m_prime[off] = (g * xdot[:, None] / sinh0)[off]
    m_prime[np.diag_indices(n)] += diag

    w = state_w(params, state)
    sw = np.sqrt(w)
    ssw = np.outer(sw, sw)
    dw = w[:, None] - w[None, :]
    dwq = w[:, None] - q * w[None, :]

    m_mat = np.zeros((n, n), dtype=complex)
    m_mat[off] = (2.0 * g * xdot[:, None] * ssw / np.where(dw == 0, 1.0, dw))[off]
    m_mat -= 2.0 * g * q * xdot[:, None] * ssw / dwq
    m_mat[np.diag_indices(n)] += diag

    # (ts13) defines the (j,i) entry from i-indexed data; the row index below
    # is a, the data index b.
    coth_m = _coth(g * (d - eta))
    diag_t = -g * ((coth0 * xdot[None, :]).sum(axis=1) - (coth_m * xdot[None, :]).sum(axis=1))
    m_tilde = np.zeros((n, n), dtype=complex)
    m_tilde[off] = (2.0 * g * xdot[None, :] * ssw / np.where(dw == 0, 1.0, dw))[off]
    m_tilde -= 2.0 * g * xdot[None, :] * ssw / dwq
    m_tilde[np.diag_indices(n)] += diag_t
    return m_mat, m_tilde, m_prime


def accelerations_from_velocities(params: ModelParams, x, xdot) -> np.ndarray:
    """Equations-of-motion kernel: xddot from positions and velocities."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    xdot = np.atleast_1d(np.asarray(xdot, dtype=complex))
    n = x.size
    if n == 1:
        return np.zeros(1, dtype=complex)
    g, eta = params.gamma, params.eta
    d = _xdiff(x)
    off = ~np.eye(n, dtype=bool)
    kernel = np.zeros((n, n), dtype=complex)
    kernel[off] = (
        _coth(g * (d + eta))[off] + _coth(g * (d - eta))[off] - 2.0 * _coth(g * d[off])
    )
    return -g * xdot * (kernel * xdot[None, :]).sum(axis=1)


def rs_accelerations(params: ModelParams, state: PhaseState) -> np.ndarray:
    """xddot of the model along the t_1 flow."""
    validate_state(params, state)
    return accelerations_from_velocities(params, state.x, velocity_map(params, state))


def _lax_power(params: ModelParams, lax: np.ndarray, m: int) -> np.ndarray:
    """Integer matrix power; negative powers go through the LU inverse."""
    n = lax.shape[0]
    if m == 0:
        return np.eye(n, dtype=complex)
    try:
        base = lax if m > 0 else linalg.inv(lax)
    except SingularMatrix as exc:
        raise SingularLax("Lax matrix is numerically singular") from exc
    out = base.copy()
    for _ in range(abs(m) - 1):
        out = out @ base
    return out


def hamiltonian(params: ModelParams, state: PhaseState, m: int) -> complex:
    """H_m = -kappa_m tr L^m (m > 0); Hbar_|m| = -kappa_m tr L^m (m < 0)."""
    if m == 0:
        raise ValueError("flow index m must be nonzero")
    lax = lax_matrix(params, state)
    return -params.kappa(m) * complex(np.trace(_lax_power(params, lax, m)))


def dlax_dx(params: ModelParams, state: PhaseState) -> np.ndarray:
    """Closed-form dL/dx_i at fixed momenta; shape (N, N, N), [i] = dL/dx_i."""
    validate_state(params, state)
    g, eta = params.gamma, params.eta
    n = state.n
    lax = lax_matrix(params, state)
    d = _xdiff(state.x)
    off = ~np.eye(n, dtype=bool)
    eye = np.eye(n)

    coth0 = np.zeros((n, n), dtype=complex)
    coth0[off] = _coth(g * d[off])
    coth_p = _coth(g * (d + eta))
    coth_m = _coth(g * (d - eta))
    s_diag = ((coth_p - coth0) * off).sum(axis=1)

    t = coth_m[None, :, :] * (eye[:, None, :] - eye[:, :, None])
    t = t + ((coth_m - coth0) * off)[:, :, None]
    t = t + (eye * s_diag[:, None])[:, :, None]
    return g * lax[None, :, :] * t


def a_matrix(params: ModelParams, state: PhaseState, i: int | None = None) -> np.ndarray:
    """A^(i) of the gradient calculation; all i stacked when ``i`` is None."""
    validate_state(params, state)
    g, eta = params.gamma, params.eta
    n = state.n
    lax = lax_matrix(params, state)
    d = _xdiff(state.x)
    off = ~np.eye(n, dtype=bool)
    eye = np.eye(n)

    coth0 = np.zeros((n, n), dtype=complex)
    coth0[off] = _coth(g * d[off])
    coth_p = _coth(g * (d + eta))
    coth_m = _coth(g * (d - eta))
    s_diag = ((coth_p - coth0) * off).sum(axis=1)

    t = (coth0 * off)[:, None, :] * np.ones((n, n, n))
    t = t - coth_m[:, None, :] * off[:, :, None]
    t = t + coth_p[:, :, None] * (eye[:, None, :] - eye[:, :, None])
    t = t - (eye * s_diag[:, None])[:, :, None]
    out = g * lax[None, :, :] * t
    return out if i is None else out[i]


def c_matrix_diagonals(params: ModelParams, state: PhaseState) -> np.ndarray:
    """Diagonals of C^(i); row i holds diag(C^(i))."""
    g, eta = params.gamma, params.eta
    n = state.n
    d = _xdiff(state.x)
    off = ~np.eye(n, dtype=bool)
    coth0 = np.zeros((n, n), dtype=complex)
    coth0[off] = _coth(g * d[off])
    coth_p = _coth(g * (d + eta))
    # C^(i)_ll = gamma [coth(gamma(x_li + eta)) - coth(gamma x_li) (l != i)]
    return g * (coth_p.T - coth0.T)


def gradient_identity_residual(params: ModelParams, state: PhaseState) -> float:
    """Max relative residual of A^(i) + dL/dx_i + [C^(i), L] = 0 over i."""
    lax = lax_matrix(params, state)
    amats = a_matrix(params, state)
    dls = dlax_dx(params, state)
    cdiags = c_matrix_diagonals(params, state)
    worst = 0.0
    for i in range(state.n):
        comm = (cdiags[i][:, None] - cdiags[i][None, :]) * lax
        res = amats[i] + dls[i] + comm
        scale = max(np.abs(amats[i]).max(), np.abs(dls[i]).max(), np.abs(comm).max(), 1.0)
        worst = max(worst, float(np.abs(res).max() / scale))
    return worst


def hamiltonian_gradients(params: ModelParams, state: PhaseState, m: int):
    """Analytic (dH/dp, dH/dx) for the (signed) flow index m.

    dH_m/dp_i = -kappa_m m eta (L^m)_ii and
    dH_m/dx_i = -kappa_m m tr(dL/dx_i L^(m-1)); both are validated against
    central finite differences in the tests.
    """
    if m == 0:
        raise ValueError("flow index m must be nonzero")
    lax = lax_matrix(params, state)
    kappa = params.kappa(m)
    lm = _lax_power(params, lax, m)
    lm1 = _lax_power(params, lax, m - 1)
    dp = -kappa * m * params.eta * np.diag(lm).copy()
    dls = dlax_dx(params, state)
    dx = -kappa * m * np.einsum("ijk,kj->i", dls, lm1)
    return dp, dx


def poisson_bracket(params: ModelParams, state: PhaseState, m: int, n: int) -> complex:
    """{H_m, H_n} with analytic gradients; vanishes by involution."""
    gpm, gxm = hamiltonian_gradients(params, state, m)
    gpn, gxn = hamiltonian_gradients(params, state, n)
    return complex(np.sum(gpm * gxn - gxm * gpn))


def tbar1_velocities(params: ModelParams, state: PhaseState) -> np.ndarray:
    """d x_i / d tbar_1 from the product relation pairing it with xdot."""
    validate_state(params, state)
    xdot = velocity_map(params, state)
    if np.any(xdot == 0):
        raise ZeroVelocity("tbar_1 velocities need nonzero t_1 velocities")
    w = state_w(params, state)
    q = params.q
    n = state.n
    num = np.prod(q * w[:, None] - w[None, :], axis=1) * np.prod(
        w[:, None] / q - w[None, :], axis=1
    )
    dw = w[:, None] - w[None, :]
    den = np.prod(np.where(np.eye(n, dtype=bool), 1.0, dw), axis=1) ** 2
    wdot_bar_times_wdot = num / den
    return wdot_bar_times_wdot / (4.0 * params.gamma**2 * w**2 * xdot)


def lax_bar_matrix(params: ModelParams, state: PhaseState) -> np.ndarray:
    """Negative-flow Lax matrix (gauge form, tbar_1 velocities)."""
    return gauge_lax_matrix(params, state, xdot=tbar1_velocities(params, state))


def u_plus_minus(params: ModelParams, w) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of U_+ and U_-: prod_k (w_i - q^(+-1) w_k) / prod_{l != i} (w_i - w_l)."""
    w = np.asarray(w, dtype=complex)
    n = w.size
    q = params.q
    dw = np.where(np.eye(n, dtype=bool), 1.0, w[:, None] - w[None, :])
    den = np.prod(dw, axis=1)
    up = np.prod(w[:, None] - q * w[None, :], axis=1) / den
    um = np.prod(w[:, None] - w[None, :] / q, axis=1) / den
    return up, um


def similarity_residual(params: ModelParams, state: PhaseState) -> float:
    """Relative residual of L^-1 = -W^-1 U_- Lbar^T (W^-1 U_-)^-1."""
    w = state_w(params, state)
    _, um = u_plus_minus(params, w)
    lg = gauge_lax_matrix(params, state)
    lbar = lax_bar_matrix(params, state)
    try:
        linv = linalg.inv(lg)
    except SingularMatrix as exc:
        raise SingularLax("Lax matrix is numerically singular") from exc
    d = um / w
    rhs = -(d[:, None] * lbar.T) / d[None, :]
    scale = max(np.abs(linv).max(), np.abs(rhs).max(), 1e-300)
    return float(np.abs(linv - rhs).max() / scale)


def cauchy_inverse(params: ModelParams, w) -> np.ndarray:
    """Closed-form inverse of the Cauchy matrix C_ij = 1/(w_i - q w_j)."""
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    n = w.size
    q = params.q
    scale = np.abs(w).max()
    dw = w[:, None] - w[None, :]
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.abs(dw[off]).min() < params.eps_coll * scale:
        raise DegenerateNodes("coincident Cauchy nodes")
    if np.abs(w[:, None] - q * w[None, :]).min() < params.eps_coll * scale:
        raise DegenerateNodes("q-resonant Cauchy nodes")
    qwi_minus_w = q * w[:, None] - w[None, :]  # [i, k] = q w_i - w_k
    w_minus_qw = w[:, None] - q * w[None, :]  # [j, k] = w_j - q w_k
    prod_i = np.prod(qwi_minus_w, axis=1)
    prod_j = np.prod(w_minus_qw, axis=1)
    sep = np.prod(np.where(np.eye(n, dtype=bool), 1.0, dw), axis=1)
    denom = q ** (n - 1) * qwi_minus_w * np.outer(sep, sep)
    return (prod_i[:, None] * prod_j[None, :]) / denom


def cauchy_matrix(params: ModelParams, w) -> np.ndarray:
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return 1.0 / (w[:, None] - params.q * w[None, :])


def conserved_spectrum(params: ModelParams, state: PhaseState) -> np.ndarray:
    """tr L^k for k = 1..N via repeated multiplication (no eigensolver)."""
    lax = lax_matrix(params, state)
    out = np.empty(params.n, dtype=complex)
    power = np.eye(params.n, dtype=complex)
    for k in range(params.n):
        power = power @ lax
        out[k] = np.trace(power)
    return out


def trace_powers(params: ModelParams, state: PhaseState, kmax: int, negative: bool = False):
    """tr L^k for k = 1..kmax (or k = -1..-kmax when ``negative``)."""
    lax = lax_matrix(params, state)
    base = _lax_power(params, lax, -1) if negative else lax
    out = np.empty(kmax, dtype=complex)
    power = np.eye(params.n, dtype=complex)
    for k in range(kmax):
        power = power @ base
        out[k] = np.trace(power)
    return out
