"""Backlund pair of tau-zero systems and the discrete-time generating equation.

The partner system ``y`` collects the zeros of the Miwa-shifted tau
``tau'(x, t - [mu^-1])``; together with the original zeros ``x`` it satisfies
a closed first-order system (the Backlund transformation of the model), and
the ratio of its two halves gives the discrete-time equation whose expansion
in 1/mu generates every higher equation of motion.

All shifted polynomials are assembled exactly from the rank-1 determinant
machinery (the shifted matrix is ``F(mu) G`` with ``F`` a resolvent ratio in
the initial Lax matrix), so zeros are as accurate as the root finder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams, accelerations_from_velocities, _coth, _xdiff
from .errors import CollisionSingularity
from .tau import (
    HierarchyTimes,
    TauContext,
    ZeroSet,
    evolution_matrix,
    initial_zero_set,
    miwa_shift_factor,
    tau_zeros,
    zero_velocities,
)


@dataclass(frozen=True)
class BacklundPair:
    """Zeros of tau (x-system) and of the mu-shifted tau (y-system)."""

    mu: complex
    x_set: ZeroSet
    y_set: ZeroSet

    @property
    def x(self) -> np.ndarray:
        return self.x_set.x

    @property
    def y(self) -> np.ndarray:
        return self.y_set.x


def _validate_pair(params: ModelParams, x: np.ndarray, y: np.ndarray) -> None:
    # x_i ~ y_i is fine (mu -> inf limit); only the eta-shifted denominators
    # of the Backlund kernels must stay away from zero.
    g, eta = params.gamma, params.eta
    cross = x[:, None] - y[None, :]
    if np.abs(np.sinh(g * (cross - eta))).min() < params.eps_coll:
        raise CollisionSingularity("x_i - y_k collides with eta (mod i pi/gamma)")


def backlund_partner(
    ctx: TauContext,
    times: HierarchyTimes,
    mu: complex,
    x_start: ZeroSet | None = None,
) -> BacklundPair:
    """Zeros of tau' at ``times`` paired with zeros of the -[mu^-1] shift.

    The y-roots are warm-started from the x-roots (the shift is O(1/mu)),
    matched by global nearest distance and branch-unwrapped against the
    x-positions.
    """
    g_mat = evolution_matrix(ctx, times)
    if x_start is None:
        x_start = initial_zero_set(ctx)
    x_set = tau_zeros(ctx, times, warm_start=x_start, g_mat=g_mat)
    shifted = miwa_shift_factor(ctx, mu, -1) @ g_mat
    y_set = tau_zeros(ctx, times, warm_start=x_set, g_mat=shifted)
    _validate_pair(ctx.params, x_set.x, y_set.x)
    return BacklundPair(mu=complex(mu), x_set=x_set, y_set=y_set)


def backlund_velocities(ctx: TauContext, times: HierarchyTimes, pair: BacklundPair):
    """Analytic t_1 velocities (xdot, ydot) of both zero systems."""
    g_mat = evolution_matrix(ctx, times)
    shifted = miwa_shift_factor(ctx, pair.mu, -1) @ g_mat
    g = ctx.params.gamma
    wdot_x = zero_velocities(ctx, pair.x_set, g_mat, m=1)
    wdot_y = zero_velocities(ctx, pair.y_set, shifted, m=1)
    return wdot_x / (2.0 * g * pair.x_set.roots), wdot_y / (2.0 * g * pair.y_set.roots)


def backlund_residual(
    params: ModelParams, pair: BacklundPair, mu: complex, xdot, ydot
) -> np.ndarray:
    """Residuals (2N) of both halves of the Backlund system.

    Each residual is gamma*velocity plus mu sinh(gamma eta) times the product
    kernel, normalized by the larger of the two terms.
    """
    g, eta = params.gamma, params.eta
    x, y = pair.x, pair.y
    n = x.size
    _validate_pair(params, x, y)
    mu = complex(mu)
    off = ~np.eye(n, dtype=bool)

    dx = _xdiff(x)
    ratio_x = np.where(off, np.sinh(g * (dx - eta)) / np.where(off, np.sinh(g * dx), 1.0), 1.0)
    prod_x = np.prod(ratio_x, axis=1)
    cross = x[:, None] - y[None, :]
    prod_xy = np.prod(np.sinh(g * cross) / np.sinh(g * (cross - eta)), axis=1)
    term_x = mu * np.sinh(g * eta) * prod_x * prod_xy
    res_x = g * np.asarray(xdot, dtype=complex) + term_x
    scale_x = np.maximum(np.abs(g * np.asarray(xdot)), np.abs(term_x))

    dy = _xdiff(y)
    ratio_y = np.where(off, np.sinh(g * (dy + eta)) / np.where(off, np.sinh(g * dy), 1.0), 1.0)
    prod_y = np.prod(ratio_y, axis=1)
    cross_y = y[:, None] - x[None, :]
    prod_yx = np.prod(np.sinh(g * cross_y) / np.sinh(g * (cross_y + eta)), axis=1)
    term_y = mu * np.sinh(g * eta) * prod_y * prod_yx
    res_y = g * np.asarray(ydot, dtype=complex) + term_y
    scale_y = np.maximum(np.abs(g * np.asarray(ydot)), np.abs(term_y))

    return np.concatenate([res_x / np.maximum(scale_x, 1e-300), res_y / np.maximum(scale_y, 1e-300)])


def shifted_zero_sets(
    ctx: TauContext,
    times: HierarchyTimes,
    mu: complex,
    x_start: ZeroSet | None = None,
    tol: float = 1e-14,
):
    """(x-system, y+ at t+[mu^-1], y- at t-[mu^-1]) zero sets at ``times``.

    The tight default root tolerance matters here: for large mu the shifted
    zeros sit O(1/mu) from the x-zeros and downstream logarithms amplify
    root noise by mu.
    """
    g_mat = evolution_matrix(ctx, times)
    if x_start is None:
        x_start = initial_zero_set(ctx)
    x_set = tau_zeros(ctx, times, warm_start=x_start, g_mat=g_mat, tol=tol)
    y_plus = tau_zeros(
        ctx, times, warm_start=x_set, g_mat=miwa_shift_factor(ctx, mu, +1) @ g_mat, tol=tol
    )
    y_minus = tau_zeros(
        ctx, times, warm_start=x_set, g_mat=miwa_shift_factor(ctx, mu, -1) @ g_mat, tol=tol
    )
    return x_set, y_plus, y_minus


def _discrete_lhs(params: ModelParams, x: np.ndarray, yp: np.ndarray, ym: np.ndarray):
    """Product side of the discrete-time equation, one value per particle."""
    g, eta = params.gamma, params.eta
    dxp = x[:, None] - yp[None, :]
    dxx = _xdiff(x)
    dxm = x[:, None] - ym[None, :]
    factors = (
        np.sinh(g * dxp)
        / np.sinh(g * (dxp + eta))
        * np.sinh(g * (dxx + eta))
        / np.sinh(g * (dxx - eta))
        * np.sinh(g * (dxm - eta))
        / np.sinh(g * dxm)
    )
    return np.prod(factors, axis=1)


def discrete_time_residual(
    ctx: TauContext,
    times: HierarchyTimes,
    mu: complex,
    x_start: ZeroSet | None = None,
) -> np.ndarray:
    """Residual (per particle) of the discrete-time generating equation.

    The equation states that the triple product over the x-system and the
    two mu-shifted zero systems equals -1 identically in mu.
    """
    x_set, y_plus, y_minus = shifted_zero_sets(ctx, times, mu, x_start)
    return _discrete_lhs(ctx.params, x_set.x, y_plus.x, y_minus.x) + 1.0


def discrete_expansion_check(
    ctx: TauContext,
    times: HierarchyTimes,
    mu0: complex,
    x_start: ZeroSet | None = None,
):
    """Extract the 1/mu coefficient of the generating equation numerically.

    Evaluates log(-product) at mu0, 2 mu0, 4 mu0, Richardson-extrapolates the
    1/mu coefficient c_i, and converts it into an implied acceleration
    xddot_implied = (c_i - S_i) xdot_i, where S_i is the pairwise coth sum.
    Returns (xddot_implied, xddot_eom) whose agreement is the generating-form
    counterpart of the equations of motion.
    """
    g_mat = evolution_matrix(ctx, times)
    if x_start is None:
        x_start = initial_zero_set(ctx)
    x_set = tau_zeros(ctx, times, warm_start=x_start, g_mat=g_mat)
    mus = [mu0, 2.0 * mu0, 4.0 * mu0]
    logs = []
    for mu in mus:
        _, yp, ym = shifted_zero_sets(ctx, times, mu, x_start=x_set)
        lhs = _discrete_lhs(ctx.params, x_set.x, yp.x, ym.x)
        logs.append(np.asarray(mu) * np.log(-lhs))
    f1, f2, f4 = logs
    coeff = (8.0 * f4 - 6.0 * f2 + f1) / 3.0

    g, eta = ctx.params.gamma, ctx.params.eta
    xdot = zero_velocities(ctx, x_set, g_mat, m=1) / (2.0 * g * x_set.roots)
    x = x_set.x
    n = x.size
    d = _xdiff(x)
    off = ~np.eye(n, dtype=bool)
    kernel = np.zeros((n, n), dtype=complex)
    kernel[off] = (
        _coth(g * (d + eta))[off] + _coth(g * (d - eta))[off] - 2.0 * _coth(g * d[off])
    )
    s_sum = g * (kernel * xdot[None, :]).sum(axis=1)
    implied = (coeff - s_sum) * xdot
    eom = accelerations_from_velocities(ctx.params, x, xdot)
    return implied, eom
