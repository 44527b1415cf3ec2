"""Pole-ansatz wave functions and the residue identities behind the flows.

The wave function and its three companions are rational in ``w`` with simple
poles at the tau zeros; their residues (the coefficient vectors) solve the
resolvent systems

    (z I - q^(1/2) L) ctilde          = Xdot W^(1/2) e           (kind "c")
    ctilde* [Xdot^-1 (z I - q^(-1/2) L)] = -e^T W^(1/2)          (kind "cstar")
    btilde^T [Xbardot^-1 (z^-1 I + q^(-1/2) Lbar)] = e^T W^(1/2) (kind "b")
    (z^-1 I + q^(1/2) Lbar) btilde*   = -Xbardot W^(1/2) e       (kind "bstar")

in the gauge built from the principal square roots of ``w_i``.  Contour
integrals of bilinear combinations of these coefficients reproduce the
hierarchy velocities; comparing them against the trace formulas is the
package's check of the residue identities driving the Hamiltonian structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .dynamics import (
    ModelParams,
    PhaseState,
    gauge_lax_matrix,
    lax_bar_matrix,
    state_w,
    tbar1_velocities,
    velocity_map,
)
from .errors import PoleEvaluation, ResolventSingular, SingularMatrix

_KINDS = ("c", "cstar", "b", "bstar")


@dataclass(frozen=True)
class WaveCoefficients:
    """Solved coefficients for one ansatz kind at one spectral point.

    ``values`` are the pole-residue coefficients entering the ansatz
    (c_i = w_i^(1/2) ctilde_i); ``tilde`` keeps the gauge vector that the
    linear system determines directly.
    """

    kind: str
    spectral_z: complex
    values: np.ndarray
    tilde: np.ndarray
    residual: float


def _resolvent_solve(mat, rhs, what):
    try:
        return linalg.solve(mat, rhs)
    except SingularMatrix as exc:
        raise ResolventSingular(f"{what}: spectral parameter hit the spectrum") from exc


def solve_wave_coefficients(
    params: ModelParams, state: PhaseState, z: complex, kind: str
) -> WaveCoefficients:
    """Solve the defining linear system for the requested coefficient kind."""
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}")
    n = params.n
    q = params.q
    w = state_w(params, state)
    sw = np.sqrt(w)
    eye = np.eye(n, dtype=complex)
    z = complex(z)

    if kind in ("c", "cstar"):
        lax = gauge_lax_matrix(params, state)
        xdot = velocity_map(params, state)
        if kind == "c":
            mat = z * eye - np.sqrt(q) * lax
            rhs = xdot * sw
            tilde = _resolvent_solve(mat, rhs, "c system")
            residual = np.abs(mat @ tilde - rhs).max()
        else:
            # row system: ctilde* Xdot^-1 (zI - q^-1/2 L) = -e^T W^1/2
            mat = (eye * z - lax / np.sqrt(q)).T
            tilde = -_resolvent_solve(mat, sw, "cstar system") * xdot
            residual = np.abs((tilde / xdot) @ (z * eye - lax / np.sqrt(q)) + sw).max()
    else:
        lbar = lax_bar_matrix(params, state)
        xbdot = tbar1_velocities(params, state)
        zinv = 1.0 / z
        if kind == "b":
            mat = (zinv * eye + lbar / np.sqrt(q)).T
            tilde = _resolvent_solve(mat, sw, "b system") * xbdot
            residual = np.abs((tilde / xbdot) @ (zinv * eye + lbar / np.sqrt(q)) - sw).max()
        else:
            mat = zinv * eye + np.sqrt(q) * lbar
            rhs = -xbdot * sw
            tilde = _resolvent_solve(mat, rhs, "bstar system")
            residual = np.abs(mat @ tilde - rhs).max()

    scale = max(np.abs(tilde).max() * max(abs(z), abs(1.0 / z)), np.abs(sw).max(), 1e-300)
    return WaveCoefficients(
        kind=kind,
        spectral_z=z,
        values=sw * tilde,
        tilde=tilde,
        residual=float(residual / scale),
    )


def psi_eval(
    params: ModelParams,
    state: PhaseState,
    coeffs: WaveCoefficients,
    t1: complex,
    w: complex,
    reduced: bool = False,
) -> complex:
    """Evaluate the pole ansatz for the stored coefficient kind at ``w``.

    ``reduced`` drops the exponential prefactor z^(x/eta) e^(t z) (or its
    companion for the other kinds), leaving the rational part
    ``1 + sum_i 2 gamma c_i / (denominator_i)``; the linear-problem residuals
    work with the reduced form since the prefactor is common to every term.
    """
    z = coeffs.spectral_z
    g, eta = params.gamma, params.eta
    q = params.q
    wi = state_w(params, state)
    w = complex(w)
    if coeffs.kind == "c":
        poles = w - wi
        prefactor = z ** (np.log(w) / (2.0 * g * eta)) * np.exp(t1 * z)
    elif coeffs.kind == "cstar":
        poles = w - wi
        prefactor = z ** (-np.log(w) / (2.0 * g * eta)) * np.exp(-t1 * z)
    elif coeffs.kind == "b":
        poles = q * w - wi
        prefactor = z ** (np.log(w) / (2.0 * g * eta)) * np.exp(t1 / z)
    else:
        poles = w / q - wi
        prefactor = z ** (-np.log(w) / (2.0 * g * eta)) * np.exp(-t1 / z)
    if np.abs(poles).min() < 1e-12 * max(1.0, abs(w)):
        raise PoleEvaluation("evaluation point sits on a pole of the ansatz")
    rational = 1.0 + np.sum(2.0 * g * coeffs.values / poles)
    return complex(rational) if reduced else complex(prefactor * rational)


def spectral_radius_bound(mat: np.ndarray) -> float:
    """Cheap spectral radius bound: min of the 1-, inf- and Frobenius norms."""
    return float(
        min(
            np.abs(mat).sum(axis=0).max(),
            np.abs(mat).sum(axis=1).max(),
            np.sqrt((np.abs(mat) ** 2).sum()),
        )
    )


def residue_velocity_identity(
    params: ModelParams,
    state: PhaseState,
    m: int,
    radius: float | None = None,
    nodes: int = 256,
) -> np.ndarray:
    """Difference between contour and trace formulas for d x_i / d t_m.

    For m > 0 the contour route integrates z^m ctilde*_i wdot_i^-1 ctilde_i
    over a circle outside the spectrum; the trace route is
    -kappa_m m eta tr(E_i L^m).  For m < 0 the analogous small-circle
    integral of the b-coefficients is compared against
    (-1)^|m| (sinh(|m| gamma eta)/gamma) tr(E_i Lbar^|m|).
    """
    if m == 0:
        raise ValueError("flow index m must be nonzero")
    q = params.q
    w = state_w(params, state)
    if m > 0:
        lax = gauge_lax_matrix(params, state)
        xdot = velocity_map(params, state)
        wdot = 2.0 * params.gamma * w * xdot
        if radius is None:
            radius = 2.0 * max(
                spectral_radius_bound(np.sqrt(q) * lax),
                spectral_radius_bound(lax / np.sqrt(q)),
                1e-3,
            )

        def integrand(z):
            c = solve_wave_coefficients(params, state, z, "c")
            cs = solve_wave_coefficients(params, state, z, "cstar")
            return cs.tilde * c.tilde / wdot

        contour = -2.0 * params.gamma * linalg.contour_residue_at_infinity(
            integrand, m=m, radius=radius, nodes=nodes
        )
        power = np.eye(params.n, dtype=complex)
        for _ in range(m):
            power = power @ lax
        trace = -params.kappa(m) * m * params.eta * np.diag(power)
        return contour - trace

    k = -m
    lbar = lax_bar_matrix(params, state)
    xbdot = tbar1_velocities(params, state)
    wbdot = 2.0 * params.gamma * w * xbdot
    bound = max(
        spectral_radius_bound(np.sqrt(q) * lbar), spectral_radius_bound(lbar / np.sqrt(q))
    )
    if radius is None:
        radius = 0.5 / max(bound, 1e-3)

    def integrand(z):
        b = solve_wave_coefficients(params, state, z, "b")
        bs = solve_wave_coefficients(params, state, z, "bstar")
        return bs.tilde * b.tilde / wbdot

    contour = -2.0 * params.gamma * linalg.contour_residue_at_zero(
        integrand, m=-k - 2, radius=radius, nodes=nodes
    )
    power = np.eye(params.n, dtype=complex)
    for _ in range(k):
        power = power @ lbar
    mge = k * params.gamma * params.eta
    trace = (-1.0) ** k * (np.sinh(mge) / params.gamma) * np.diag(power)
    return contour - trace


def linear_problem_residual(
    params: ModelParams,
    trajectory,
    z: complex,
    w: complex,
    m: int = 1,
) -> float:
    """Max residual of the auxiliary linear problem along a sampled flow.

    ``trajectory`` must come from ``integrate_flow`` with the matching flow
    index (m = +1 for the psi problems, m = -1 for the phi problems) and
    uniformly spaced real sample times; time derivatives of the wave
    functions are taken by central differences on the samples.

    m = +1 checks  d_t1 psi(x) = psi(x + eta) + v(x) psi(x)  and its adjoint;
    m = -1 checks  d_tbar1 phi(x) = phi(x - eta) - vbar(x) phi(x).
    """
    samples = trajectory.samples
    if len(samples) < 3:
        raise ValueError("need at least three samples for central differences")
    times = np.array([s.time for s in samples])
    steps = np.diff(times)
    h = steps[0]
    if np.abs(steps - h).max() > 1e-9 * abs(h):
        raise ValueError("trajectory samples must be uniformly spaced")

    q = params.q
    g = params.gamma
    z = complex(z)
    w = complex(w)
    worst = 0.0
    if m == 1:
        kinds = ("c", "cstar")
    elif m == -1:
        kinds = ("b", "bstar")
    else:
        raise ValueError("linear problems are available for m = +1 or -1 only")

    evaluations = {kind: [] for kind in kinds}
    vfields = []
    for sample in samples:
        st = sample.state
        wi = state_w(params, st)
        if m == 1:
            wdot = 2.0 * g * wi * velocity_map(params, st)
        else:
            wdot = 2.0 * g * wi * tbar1_velocities(params, st)
        vfields.append(np.sum(wdot / (w - wi) - wdot / (q * w - wi)))
        for kind in kinds:
            coeffs = solve_wave_coefficients(params, st, z, kind)
            evaluations[kind].append((coeffs, wi))

    for idx in range(1, len(samples) - 1):
        if m == 1:
            # psi: reduced form 1 + sum 2g c/(w - w_i); shift x+eta adds factor z
            (c_m, wi_m) = evaluations["c"][idx - 1]
            (c_0, wi_0) = evaluations["c"][idx]
            (c_p, wi_p) = evaluations["c"][idx + 1]
            psi_m = 1.0 + np.sum(2.0 * g * c_m.values / (w - wi_m))
            psi_0 = 1.0 + np.sum(2.0 * g * c_0.values / (w - wi_0))
            psi_p = 1.0 + np.sum(2.0 * g * c_p.values / (w - wi_p))
            psi_shift = 1.0 + np.sum(2.0 * g * c_0.values / (q * w - wi_0))
            # full psi = z^{x/eta} e^{t z} * reduced; d/dt adds z * reduced
            dpsi = (psi_p - psi_m) / (2.0 * h) + z * psi_0
            res = abs(-dpsi + z * psi_shift + vfields[idx] * psi_0)
            worst = max(worst, res / max(abs(z * psi_shift), abs(psi_0), 1e-300))

            (s_m, _) = evaluations["cstar"][idx - 1]
            (s_0, _) = evaluations["cstar"][idx]
            (s_p, _) = evaluations["cstar"][idx + 1]
            adj_m = 1.0 + np.sum(2.0 * g * s_m.values / (w - wi_m))
            adj_0 = 1.0 + np.sum(2.0 * g * s_0.values / (w - wi_0))
            adj_p = 1.0 + np.sum(2.0 * g * s_p.values / (w - wi_p))
            adj_shift = 1.0 + np.sum(2.0 * g * s_0.values / (w / q - wi_0))
            # v(x - eta) needs the pole sum at w/q
            wi = wi_0
            wdot = 2.0 * g * wi * velocity_map(params, samples[idx].state)
            v_down = np.sum(wdot / (w / q - wi) - wdot / (w - wi))
            dadj = (adj_p - adj_m) / (2.0 * h) - z * adj_0
            res = abs(dadj + z * adj_shift + v_down * adj_0)
            worst = max(worst, res / max(abs(z * adj_shift), abs(adj_0), 1e-300))
        else:
            (b_m, wi_m) = evaluations["b"][idx - 1]
            (b_0, wi_0) = evaluations["b"][idx]
            (b_p, wi_p) = evaluations["b"][idx + 1]
            phi_m = 1.0 + np.sum(2.0 * g * b_m.values / (q * w - wi_m))
            phi_0 = 1.0 + np.sum(2.0 * g * b_0.values / (q * w - wi_0))
            phi_p = 1.0 + np.sum(2.0 * g * b_p.values / (q * w - wi_p))
            phi_shift = 1.0 + np.sum(2.0 * g * b_0.values / (w - wi_0))
            # full phi = z^{x/eta} e^{tbar/z} (...); x -> x - eta divides by z
            dphi = (phi_p - phi_m) / (2.0 * h) + phi_0 / z
            res = abs(dphi - phi_shift / z + vfields[idx] * phi_0)
            worst = max(worst, res / max(abs(phi_shift / z), abs(phi_0), 1e-300))
    return float(worst)
