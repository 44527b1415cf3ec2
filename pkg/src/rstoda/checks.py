"""Registry of named verification checks for the CLI harness.

Every check draws its own states from a named SplitMix64 substream, computes
the worst residual over its draws, and is judged against its tolerance.  The
``equation`` field carries the short identity tag (ts14, h6a, t4, ...) so
reports can be audited against the derivation the check exercises.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import backlund as bk
from . import dynamics as dyn
from . import flows as fl
from . import linalg
from . import tau as tau_mod
from . import waves as wv
from .config import SplitMix64, sample_state


@dataclass(frozen=True)
class CheckRecord:
    name: str
    equation: str
    residual: float
    tolerance: float
    passed: bool
    runtime_s: float

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "equation": self.equation,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "runtime_s": self.runtime_s,
        }


@dataclass
class VerificationReport:
    records: list[CheckRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        records = sorted(self.records, key=lambda r: r.name)
        return {
            "checks": [r.as_dict() for r in records],
            "summary": {
                "total": len(records),
                "passed": sum(r.passed for r in records),
                "failed": sum(not r.passed for r in records),
                "overall_pass": self.passed,
            },
        }


def _variant(params: dyn.ModelParams, n: int) -> dyn.ModelParams:
    return dyn.ModelParams(
        gamma=params.gamma, eta=params.eta, n=n, m_max=params.m_max, eps_coll=params.eps_coll
    )


def _draw(params, rng, n):
    return sample_state(_variant(params, n), rng)


def _random_times(rng: SplitMix64, scale: float = 0.08) -> tau_mod.HierarchyTimes:
    return tau_mod.HierarchyTimes(
        {1: rng.complex_box(scale, scale / 2), 2: rng.complex_box(scale / 2, scale / 2)},
        {1: rng.complex_box(scale / 2, scale / 2)},
    )


def check_ts14(params, state, rng, opt):
    draws = opt.get("draws", 100)
    n_max = opt.get("n_max", 5)
    worst = 0.0
    for i in range(draws):
        n = 1 + (i % n_max)
        pv = _variant(params, n)
        worst = max(worst, dyn.commutation_residual(pv, _draw(params, rng, n)))
    return worst


def check_lax_residual(params, state, rng, opt):
    draws = opt.get("draws", 100)
    n_max = opt.get("n_max", 5)
    worst = 0.0
    for i in range(draws):
        n = 1 + (i % n_max)
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        lax = dyn.lax_matrix(pv, st)
        _, _, m_prime = dyn.lax_pair_matrices(pv, st)
        xd = dyn.velocity_map(pv, st)
        xdd = dyn.rs_accelerations(pv, st)
        g, eta = pv.gamma, pv.eta
        d = st.x[:, None] - st.x[None, :]
        den = np.sinh(g * (d - eta))
        ldot = (
            g * xdd[:, None] / den
            - g * xd[:, None] * g * (xd[:, None] - xd[None, :]) * np.cosh(g * (d - eta)) / den**2
        )
        comm = lax @ m_prime - m_prime @ lax
        scale = max(np.abs(ldot).max(), np.abs(comm).max(), 1.0)
        worst = max(worst, float(np.abs(ldot + comm).max() / scale))
    return worst


def check_h6a(params, state, rng, opt):
    draws = opt.get("draws", 50)
    n_max = opt.get("n_max", 5)
    worst = 0.0
    for i in range(draws):
        n = 1 + (i % n_max)
        worst = max(
            worst, dyn.gradient_identity_residual(_variant(params, n), _draw(params, rng, n))
        )
    return worst


def check_gradient_fd(params, state, rng, opt):
    draws = opt.get("draws", 3)
    n_max = opt.get("n_max", 4)
    h = opt.get("fd_step", 1e-6)
    worst = 0.0
    for i in range(draws):
        n = 2 + (i % max(1, n_max - 1))
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        for m in (1, 2, 3, -1, -2, -3):
            gp, gx = dyn.hamiltonian_gradients(pv, st, m)
            scale = max(np.abs(gp).max(), np.abs(gx).max(), 1.0)
            for i_part in range(n):
                pp = st.p.copy()
                pp[i_part] += h
                pm = st.p.copy()
                pm[i_part] -= h
                fd = (
                    dyn.hamiltonian(pv, dyn.PhaseState(st.x, pp), m)
                    - dyn.hamiltonian(pv, dyn.PhaseState(st.x, pm), m)
                ) / (2 * h)
                worst = max(worst, abs(gp[i_part] - fd) / scale)
                xp = st.x.copy()
                xp[i_part] += h
                xm = st.x.copy()
                xm[i_part] -= h
                fd = (
                    dyn.hamiltonian(pv, dyn.PhaseState(xp, st.p), m)
                    - dyn.hamiltonian(pv, dyn.PhaseState(xm, st.p), m)
                ) / (2 * h)
                worst = max(worst, abs(gx[i_part] - fd) / scale)
    return float(worst)


def check_involution(params, state, rng, opt):
    draws = opt.get("draws", 4)
    n_max = opt.get("n_max", 4)
    indices = (1, 2, 3, -1, -2, -3)
    worst = 0.0
    for i in range(draws):
        n = 2 + (i % max(1, n_max - 1))
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        grads = {m: dyn.hamiltonian_gradients(pv, st, m) for m in indices}
        for a in indices:
            for b in indices:
                if a >= b:
                    continue
                gpa, gxa = grads[a]
                gpb, gxb = grads[b]
                bracket = np.sum(gpa * gxb - gxa * gpb)
                scale = max(
                    float(np.sum(np.abs(gpa * gxb)) + np.sum(np.abs(gxa * gpb))), 1e-30
                )
                worst = max(worst, abs(bracket) / scale)
    return float(worst)


def check_cauchy(params, state, rng, opt):
    draws = opt.get("draws", 20)
    worst = 0.0
    for i in range(draws):
        n = 2 + (i % 5)
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        w = dyn.state_w(pv, st)
        cm = dyn.cauchy_matrix(pv, w)
        ci = dyn.cauchy_inverse(pv, w)
        resid = np.abs(cm @ ci - np.eye(n)).max()
        resid = max(resid, np.abs(ci - linalg.inv(cm)).max() / max(np.abs(ci).max(), 1.0))
        worst = max(worst, float(resid))
    return worst


def check_similarity(params, state, rng, opt):
    draws = opt.get("draws", 20)
    worst = 0.0
    for i in range(draws):
        n = 2 + (i % 4)
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        worst = max(worst, dyn.similarity_residual(pv, st))
        gp, _ = dyn.hamiltonian_gradients(pv, st, -1)
        vb = dyn.tbar1_velocities(pv, st)
        scale = max(np.abs(gp).max(), 1.0)
        worst = max(worst, float(np.abs(vb - gp).max() / scale))
    return worst


def check_correspondence(params, state, rng, opt):
    m_values = opt.get("m_values", [1, 2, 3, -1, -2, -3])
    duration = opt.get("duration", 0.25)
    samples = opt.get("samples", 10)
    rtol = opt.get("rtol", 1e-10)
    target_motion = opt.get("target_motion", 0.6)
    ctx = tau_mod.tau_context(params, state)
    start = tau_mod.initial_zero_set(ctx, state)
    worst = 0.0
    for m in m_values:
        # cap the duration so faster flows cover a comparable arc length
        gp, _ = dyn.hamiltonian_gradients(params, state, m)
        dur = min(duration, target_motion / max(float(np.abs(gp).max()), 1e-9))
        taus = np.linspace(0.0, dur, samples + 1)[1:]
        spec = fl.FlowSpec(m=m, duration=dur, rtol=rtol, atol=1e-12)
        traj = fl.integrate_flow(params, state, spec, t_eval=list(taus), record_steps=False)
        zero_path = tau_mod.tau_zero_trajectory(ctx, m, taus, start=start)
        for tv, zs in zip(taus, zero_path):
            st_flow = traj.state_at(complex(tv))
            worst = max(worst, float(np.abs(zs.x - st_flow.x).max()))
    return worst


def _admissible_draw(ctx, rng):
    bound = wv.spectral_radius_bound(np.sqrt(ctx.params.q) * ctx.lax0)
    bound = max(bound, wv.spectral_radius_bound(ctx.lax0 / np.sqrt(ctx.params.q)))
    lam = 4.0 * bound * np.exp(2j * np.pi * rng.uniform())
    mu = 5.0 * bound * np.exp(2j * np.pi * rng.uniform())
    w_scale = max(np.abs(ctx.w0).max(), 1.0)
    w = 1.7 * w_scale * np.exp(2j * np.pi * rng.uniform())
    return lam, mu, w


def check_bilinear_t4(params, state, rng, opt):
    draws = opt.get("draws", 100)
    ctx = tau_mod.tau_context(params, state)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng)
        lam, mu, w = _admissible_draw(ctx, rng)
        worst = max(worst, abs(tau_mod.bilinear_residual_positive(ctx, times, w, lam, mu)))
    return worst


def check_bilinear_t7(params, state, rng, opt):
    draws = opt.get("draws", 100)
    ctx = tau_mod.tau_context(params, state)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng)
        lam, nu, w = _admissible_draw(ctx, rng)
        worst = max(worst, abs(tau_mod.bilinear_residual_mixed(ctx, times, w, lam, nu)))
    return worst


def check_toda(params, state, rng, opt):
    draws = opt.get("draws", 10)
    ctx = tau_mod.tau_context(params, state)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng)
        _, _, w = _admissible_draw(ctx, rng)
        worst = max(worst, abs(tau_mod.toda_equation_residual(ctx, times, w)))
    return worst


def check_mkp(params, state, rng, opt):
    draws = opt.get("draws", 10)
    ctx = tau_mod.tau_context(params, state)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng)
        _, _, w = _admissible_draw(ctx, rng)
        worst = max(worst, abs(tau_mod.mkp_equation_residual(ctx, times, w)))
    return worst


def check_residue(params, state, rng, opt):
    draws = opt.get("draws", 3)
    m_values = opt.get("m_values", [1, 2, 3, -1, -2])
    worst = 0.0
    for i in range(draws):
        n = 2 + (i % 3)
        pv = _variant(params, n)
        st = _draw(params, rng, n)
        for m in m_values:
            diff = wv.residue_velocity_identity(pv, st, m)
            worst = max(worst, float(np.abs(diff).max()))
    return worst


def check_backlund_g3(params, state, rng, opt):
    draws = opt.get("draws", 5)
    ctx = tau_mod.tau_context(params, state)
    bound = wv.spectral_radius_bound(np.sqrt(params.q) * ctx.lax0)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng, scale=0.05)
        mu = 5.0 * bound * np.exp(2j * np.pi * rng.uniform())
        pair = bk.backlund_partner(ctx, times, mu)
        xdot, ydot = bk.backlund_velocities(ctx, times, pair)
        worst = max(worst, float(np.abs(bk.backlund_residual(params, pair, mu, xdot, ydot)).max()))
    return worst


def check_discrete_g6(params, state, rng, opt):
    draws = opt.get("draws", 5)
    ctx = tau_mod.tau_context(params, state)
    bound = wv.spectral_radius_bound(np.sqrt(params.q) * ctx.lax0)
    worst = 0.0
    for _ in range(draws):
        times = _random_times(rng, scale=0.05)
        mu = 5.0 * bound * np.exp(2j * np.pi * rng.uniform())
        worst = max(worst, float(np.abs(bk.discrete_time_residual(ctx, times, mu)).max()))
    return worst


def check_commutator(params, state, rng, opt):
    pairs = opt.get("pairs", [(1, 2), (1, -1)])
    duration = opt.get("duration", 0.2)
    rtol = opt.get("rtol", 1e-10)
    target_motion = opt.get("target_motion", 0.5)
    worst = 0.0
    for m, n in pairs:
        durations = []
        for idx in (m, n):
            gp, _ = dyn.hamiltonian_gradients(params, state, idx)
            durations.append(
                min(duration, target_motion / max(float(np.abs(gp).max()), 1e-9))
            )
        d = fl.flow_commutator_defect(
            params,
            state,
            fl.FlowSpec(m=m, duration=durations[0], rtol=rtol, atol=1e-12),
            fl.FlowSpec(m=n, duration=0.75 * durations[1], rtol=rtol, atol=1e-12),
        )
        worst = max(worst, d)
    return worst


# name -> (function, equation tag, default tolerance)
REGISTRY = {
    "ts14": (check_ts14, "ts14", 1e-11),
    "lax-residual": (check_lax_residual, "ts16/ts16a/ts16b", 1e-10),
    "h6a": (check_h6a, "h5/h6/h6a", 1e-11),
    "gradient-FD": (check_gradient_fd, "h2/h3/h7/n13/n14", 1e-7),
    "involution": (check_involution, "i1 involution", 1e-8),
    "cauchy-n11": (check_cauchy, "n10/n11/n12", 1e-10),
    "similarity-Lbar": (check_similarity, "n3/n7/n13", 1e-9),
    "tau-zero-correspondence": (check_correspondence, "t1 + h3/n13", 1e-6),
    "bilinear-t4": (check_bilinear_t4, "t4", 1e-9),
    "bilinear-t7": (check_bilinear_t7, "t7", 1e-9),
    "toda-mkp18a": (check_toda, "mkp18a", 1e-5),
    "mkp-mkp18": (check_mkp, "mkp18", 1e-5),
    "residue-h1h2": (check_residue, "h1/h2/n5/n6", 1e-8),
    "backlund-g3": (check_backlund_g3, "g3", 1e-8),
    "discrete-g6": (check_discrete_g6, "g6", 1e-8),
    "commutator-defect": (check_commutator, "zero-curvature", 1e-6),
}


def run_checks(config, max_workers: int = 1) -> VerificationReport:
    """Execute the configured checks; each gets an independent RNG stream."""
    from concurrent.futures import ThreadPoolExecutor

    from .config import substream
    from .errors import ConfigError

    for request in config.checks:
        if request.name not in REGISTRY:
            raise ConfigError(f"unknown check {request.name!r}")
    state = config.resolve_state()

    def run_one(request) -> CheckRecord:
        fn, equation, default_tol = REGISTRY[request.name]
        tol = default_tol if request.tolerance is None else request.tolerance
        rng = substream(config.seed, request.name)
        started = time.perf_counter()
        residual = float(fn(config.params, state, rng, dict(request.options)))
        elapsed = time.perf_counter() - started
        return CheckRecord(
            name=request.name,
            equation=equation,
            residual=residual,
            tolerance=tol,
            passed=bool(residual <= tol),
            runtime_s=elapsed,
        )

    report = VerificationReport()
    if max_workers > 1 and len(config.checks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            report.records = list(pool.map(run_one, config.checks))
    else:
        report.records = [run_one(req) for req in config.checks]
    return report
