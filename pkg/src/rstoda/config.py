"""Scenario configuration, deterministic random draws, state sampling.

Configs are JSON with complex numbers written as two-element ``[re, im]``
arrays.  All randomness flows through an explicit SplitMix64 generator so a
fixed seed reproduces every drawn state bit-for-bit on any platform:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state; z <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output z ^ (z >> 31);  uniform double = (z >> 11) / 2^53

Per-check substreams are derived by XORing the scenario seed with the
CRC-32 of the check name.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams, PhaseState, separation_margin, validate_state
from .errors import CollisionSingularity, ConfigError
from .flows import FlowSpec

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """Deterministic 64-bit PRNG with a documented, portable stream."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) / float(1 << 53))

    def complex_box(self, half_re: float, half_im: float) -> complex:
        return complex(
            self.uniform(-half_re, half_re), self.uniform(-half_im, half_im)
        )


def substream(seed: int, label: str) -> SplitMix64:
    """Independent named stream: seed XOR crc32(label)."""
    return SplitMix64((int(seed) ^ zlib.crc32(label.encode())) & _MASK64)


def sample_state(
    params: ModelParams,
    rng: SplitMix64,
    min_margin: float = 0.15,
    max_lax_norm: float | None = 6.0,
    x_jitter: float = 0.2,
    x_half_im: float = 0.35,
    p_half_re: float = 0.35,
    p_half_im: float = 0.2,
    max_tries: int = 2000,
) -> PhaseState:
    """Rejection-sample a valid state with comfortable pair separations.

    Positions are drawn around evenly spaced slots (spacing scaled by |eta|)
    with a complex jitter; that keeps pairwise gaps away from 0 and +-eta so
    the rejection loop converges even for N = 5-6.  Draws are rejected until
    the smallest |sinh| separation exceeds ``min_margin`` and, when
    ``max_lax_norm`` is set, until the Lax matrix row norm stays under it
    (large rows make the higher flows needlessly stiff).
    """
    n = params.n
    spacing = 1.6 * max(1.0, abs(params.eta))
    slots = spacing * (np.arange(n) - (n - 1) / 2.0)
    for _ in range(max_tries):
        x = slots + np.array([rng.complex_box(x_jitter, x_half_im) for _ in range(n)])
        p = np.array([rng.complex_box(p_half_re, p_half_im) for _ in range(n)])
        state = PhaseState(x, p)
        if n > 1 and separation_margin(params, state) < min_margin:
            continue
        if max_lax_norm is not None:
            from .dynamics import lax_matrix

            if np.abs(lax_matrix(params, state)).sum(axis=1).max() > max_lax_norm:
                continue
        return state
    raise ConfigError(
        f"could not sample a separated state for N = {n} in {max_tries} tries"
    )


def _parse_complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {value!r}")


@dataclass(frozen=True)
class CheckRequest:
    name: str
    tolerance: float | None = None
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParams
    state: PhaseState | None  # None -> draw from seed
    flows: list[FlowSpec]
    checks: list[CheckRequest]
    seed: int

    def resolve_state(self) -> PhaseState:
        if self.state is not None:
            return self.state
        return sample_state(self.params, substream(self.seed, "initial-state"))


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a decoded JSON document into a ScenarioConfig.

    Raises ``ConfigError`` (CLI exit code 2) on any schema violation,
    including explicitly colliding initial states.
    """
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    try:
        pblock = data["params"]
        gamma = _parse_complex(pblock["gamma"], "params.gamma")
        eta = _parse_complex(pblock["eta"], "params.eta")
        n = int(pblock["n"])
    except KeyError as exc:
        raise ConfigError(f"missing required params field: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed params block: {exc}") from exc
    try:
        params = ModelParams(
            gamma=gamma,
            eta=eta,
            n=n,
            m_max=int(pblock.get("m_max", 6)),
            eps_coll=float(pblock.get("eps_coll", 1e-8)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc

    state = None
    sblock = data.get("state", {"mode": "random"})
    mode = sblock.get("mode", "explicit" if "x" in sblock else "random")
    if mode == "explicit":
        try:
            x = np.array([_parse_complex(v, "state.x") for v in sblock["x"]])
            p = np.array([_parse_complex(v, "state.p") for v in sblock["p"]])
        except KeyError as exc:
            raise ConfigError(f"explicit state needs x and p: {exc}") from exc
        if x.size != params.n or p.size != params.n:
            raise ConfigError(
                f"state length {x.size}/{p.size} does not match N = {params.n}"
            )
        state = PhaseState(x, p)
        try:
            validate_state(params, state)
        except CollisionSingularity as exc:
            raise ConfigError(f"initial state violates separation invariants: {exc}") from exc
    elif mode != "random":
        raise ConfigError(f"unknown state mode {mode!r}")

    flows = []
    for i, fblock in enumerate(data.get("flows", [])):
        try:
            spec = FlowSpec(
                m=int(fblock["m"]),
                duration=_parse_complex(fblock["duration"], f"flows[{i}].duration"),
                rtol=float(fblock.get("rtol", 1e-10)),
                atol=float(fblock.get("atol", 1e-12)),
                max_step=float(fblock.get("max_step", 0.1)),
            )
            spec.validate(params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed flow entry {i}: {exc}") from exc
        flows.append(spec)

    checks = []
    for i, cblock in enumerate(data.get("checks", [])):
        if isinstance(cblock, str):
            checks.append(CheckRequest(name=cblock))
            continue
        if not isinstance(cblock, dict) or "name" not in cblock:
            raise ConfigError(f"check entry {i} needs a name")
        tol = cblock.get("tolerance")
        options = {
            k: v for k, v in cblock.items() if k not in ("name", "tolerance")
        }
        checks.append(
            CheckRequest(
                name=str(cblock["name"]),
                tolerance=None if tol is None else float(tol),
                options=options,
            )
        )

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed > _MASK64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return ScenarioConfig(params=params, state=state, flows=flows, checks=checks, seed=seed)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def default_config_dict(n: int = 3, seed: int = 20190731) -> dict:
    """Desk-scale scenario: every registered check at default tolerances."""
    from .checks import REGISTRY

    return {
        "params": {"gamma": [0.5, 0.0], "eta": [1.0, 0.0], "n": n},
        "state": {"mode": "random"},
        "flows": [
            {"m": 1, "duration": [0.3, 0.0], "rtol": 1e-10},
            {"m": 2, "duration": [0.2, 0.1], "rtol": 1e-10},
            {"m": -1, "duration": [0.25, 0.0], "rtol": 1e-10},
        ],
        "checks": sorted(REGISTRY),
        "seed": seed,
    }
