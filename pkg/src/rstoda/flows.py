"""Adaptive integration of the hierarchy flows in complex time.

A flow with index ``m`` is the Hamiltonian system

    dx/dtau = dH_m/dp,    dp/dtau = -dH_m/dx,

integrated along the straight segment from 0 to ``duration`` in the complex
tau plane (the flows are holomorphic, so the path does not matter for the
identity checks done at small durations).  The stepper is an embedded
Dormand-Prince 5(4) pair with the usual error controller; accuracy rather
than long-time structure preservation is the goal, hence no symplectic
scheme.  Candidate steps that land outside the valid phase-space region
(particle collisions) are rejected and retried with a smaller step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ModelParams,
    PhaseState,
    conserved_spectrum,
    hamiltonian_gradients,
    is_valid_state,
)
from .errors import CollisionEncountered, CollisionSingularity, StepUnderflow

# Dormand-Prince 5(4) tableau; the 7th stage sits on the 5th-order solution
# (FSAL).
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_MIN_STEP_FRACTION = 1e-12


@dataclass(frozen=True)
class FlowSpec:
    """One hierarchy flow: signed index, complex duration, tolerances."""

    m: int
    duration: complex
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.1

    def validate(self, params: ModelParams) -> None:
        if self.m == 0:
            raise ValueError("flow index m must be nonzero")
        if abs(self.m) > params.m_max:
            raise ValueError(f"|m| = {abs(self.m)} exceeds configured m_max = {params.m_max}")
        if self.rtol < 1e-13:
            raise ValueError("rtol below 1e-13 is not resolvable in double precision")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass
class TrajectorySample:
    time: complex
    state: PhaseState
    invariants: np.ndarray


@dataclass
class Trajectory:
    """Ordered flow samples plus the observed invariant drift."""

    flow: FlowSpec
    samples: list[TrajectorySample] = field(default_factory=list)

    @property
    def final_state(self) -> PhaseState:
        return self.samples[-1].state

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    def invariant_drift(self) -> float:
        """Max relative change of tr L^k between first and last sample."""
        first = self.samples[0].invariants
        last = self.samples[-1].invariants
        scale = np.maximum(np.abs(first), 1e-12)
        return float((np.abs(last - first) / scale).max()) if first.size else 0.0

    def state_at(self, time: complex) -> PhaseState:
        """Sample state at a recorded time (exact match up to rounding)."""
        times = self.times
        idx = int(np.argmin(np.abs(times - time)))
        if abs(times[idx] - time) > 1e-9 * max(1.0, abs(time)):
            raise KeyError(f"time {time} was not recorded")
        return self.samples[idx].state


def _rhs(params: ModelParams, m: int, y: np.ndarray) -> np.ndarray:
    n = params.n
    state = PhaseState(y[:n], y[n:])
    dp, dx = hamiltonian_gradients(params, state, m)
    return np.concatenate([dp, -dx])


def integrate_flow(
    params: ModelParams,
    state0: PhaseState,
    spec: FlowSpec,
    t_eval=None,
    record_steps: bool = True,
) -> Trajectory:
    """Integrate the flow ``spec`` from ``state0``; returns a ``Trajectory``.

    ``t_eval`` (optional) lists complex times on the segment [0, duration]
    that must be hit exactly (by step clamping) and recorded.  With
    ``record_steps`` every accepted step is recorded as well.

    Raises ``CollisionEncountered`` (with the last good state attached) when
    the flow approaches the collision set, ``StepUnderflow`` when the error
    control collapses for any other reason.
    """
    spec.validate(params)
    if not is_valid_state(params, state0):
        raise CollisionSingularity("initial state violates separation invariants")
    n = params.n
    total = abs(spec.duration)
    traj = Trajectory(flow=spec)

    def record(s: float, y: np.ndarray) -> None:
        state = PhaseState(y[:n].copy(), y[n:].copy())
        traj.samples.append(
            TrajectorySample(
                time=spec.duration * (s / total) if total else 0.0,
                state=state,
                invariants=conserved_spectrum(params, state),
            )
        )

    y = np.concatenate([state0.x, state0.p])
    record(0.0, y)
    if total == 0.0:
        return traj

    direction = spec.duration / total

    def f(yv):
        return direction * _rhs(params, spec.m, yv)

    checkpoints = sorted({min(float(abs(t)), total) for t in (t_eval or [])} | {total})
    s = 0.0
    h = min(spec.max_step, total)
    min_h = max(total * _MIN_STEP_FRACTION, 1e-300)
    k1 = f(y)
    next_idx = 0
    while next_idx < len(checkpoints):
        target = checkpoints[next_idx]
        if s >= target - 1e-14 * total:
            next_idx += 1
            continue
        clamped = min(h, target - s)
        hit_target = clamped >= target - s - 1e-14 * total

        rejected_by_collision = False
        try:
            stages = [k1]
            for row in _DP_A[1:]:
                ytmp = y + clamped * sum(a * k for a, k in zip(row, stages))
                stages.append(f(ytmp))
        except CollisionSingularity:
            rejected_by_collision = True

        if not rejected_by_collision:
            y5 = y + clamped * sum(b * k for b, k in zip(_DP_B5, stages))
            y4 = y + clamped * sum(b * k for b, k in zip(_DP_B4, stages))
            tol = spec.atol + spec.rtol * np.maximum(np.abs(y), np.abs(y5))
            err_norm = float(np.sqrt(np.mean((np.abs(y5 - y4) / tol) ** 2)))
            accurate = err_norm <= 1.0
            if accurate and not is_valid_state(params, PhaseState(y5[:n], y5[n:])):
                rejected_by_collision = True

        if rejected_by_collision:
            h = clamped / 2.0
            if h < min_h:
                last = traj.samples[-1]
                raise CollisionEncountered(
                    "flow approached the collision set",
                    last_time=last.time,
                    last_state=last.state,
                )
            continue

        if accurate:
            s += clamped
            y = y5
            k1 = stages[-1]  # FSAL: stage 7 sits on the accepted solution
            if record_steps or hit_target:
                record(s, y)
            growth = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm**-0.2))
            h = min(spec.max_step, clamped * growth)
        else:
            h = clamped * min(0.9, max(0.2, 0.9 * err_norm**-0.2))
            if h < min_h:
                raise StepUnderflow(f"step collapsed at s = {s:.6g} of {total:.6g}")
    return traj


def flow_endpoint(params: ModelParams, state0: PhaseState, spec: FlowSpec) -> PhaseState:
    """Final state only (intermediate steps not recorded)."""
    return integrate_flow(params, state0, spec, record_steps=False).final_state


def flow_commutator_defect(
    params: ModelParams, state0: PhaseState, spec_a: FlowSpec, spec_b: FlowSpec
) -> float:
    """Max-norm distance between B(A(state0)) and A(B(state0))."""
    ab = flow_endpoint(params, flow_endpoint(params, state0, spec_a), spec_b)
    ba = flow_endpoint(params, flow_endpoint(params, state0, spec_b), spec_a)
    return float(max(np.abs(ab.x - ba.x).max(), np.abs(ab.p - ba.p).max()))
