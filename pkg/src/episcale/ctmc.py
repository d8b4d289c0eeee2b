"""Exact event-driven simulation of the SIS chain, the SIR chain, and the
linear birth-death envelope that dominates them.

All chains are simulated with the Gillespie direct method: an exponential
sojourn at the current total rate, then a Bernoulli draw for the direction.
Paths are piecewise constant, so the infected-time integral is accumulated
exactly as a sum of ``state * segment length``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Iterator, Optional

import numba as nb
import numpy as np

from .errors import ParameterError
from .rng import RngSeed, make_generator, map_replicates, replicate_generator

_NO_CHECKPOINTS = np.zeros(0)
_INITIAL_CAPACITY = 1024


def param_violations(N, alpha, b, lam, beta_override=None) -> list[str]:
    """List every violated constraint on a parameter set (empty when valid)."""
    problems = []
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        problems.append("N must be a positive integer")
        return problems
    if not (0 < alpha <= 0.5):
        problems.append("alpha must be in (0, 0.5]" if alpha <= 0 else "alpha must be ≤ 0.5")
    if b < 0:
        problems.append("b must be nonnegative")
    if problems:
        return problems
    scale = N**alpha
    x0 = math.floor(b * scale + 0.5)
    if b > 0 and x0 < 1:
        problems.append(f"b*N^alpha = {b * scale:.3g} rounds to 0 infected; increase b or N")
    if x0 > N:
        problems.append(f"initial infected {x0} exceeds N = {N}")
    if beta_override is not None:
        if beta_override < 0:
            problems.append("beta_override must be nonnegative")
    elif 1.0 + lam / scale <= 0:
        problems.append("beta must be positive (1 + lambda/N^alpha <= 0)")
    return problems


@dataclass(frozen=True)
class EpidemicParams:
    """Population size, scaling exponent, initial mass and near-critical drift.

    The chain starts from ``x0 = round_half_up(b * N**alpha)`` infected and uses
    ``beta = 1 + lam / N**alpha`` unless ``beta_override`` is given.
    """

    N: int
    alpha: float
    b: float
    lam: float = 0.0
    beta_override: Optional[float] = None

    def __post_init__(self):
        problems = param_violations(self.N, self.alpha, self.b, self.lam, self.beta_override)
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def scale(self) -> float:
        return self.N**self.alpha

    @property
    def x0(self) -> int:
        return math.floor(self.b * self.scale + 0.5)

    @property
    def beta(self) -> float:
        if self.beta_override is not None:
            return float(self.beta_override)
        return 1.0 + self.lam / self.scale

    @property
    def default_time_cap(self) -> float:
        return 50.0 * self.scale


@dataclass
class JumpPath:
    """Piecewise-constant trajectory: ``states[k]`` holds on ``[times[k], times[k+1])``.

    ``states`` is 1-d for single-coordinate chains and has shape ``(n, 2)`` for
    the SIR chain ``(i, r)``. The last state holds until ``terminal_time``.
    """

    times: np.ndarray
    states: np.ndarray
    terminal_time: float

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[tuple]:
        for t, s in zip(self.times, self.states):
            yield float(t), (tuple(int(v) for v in s) if np.ndim(s) else int(s))

    @property
    def infected(self) -> np.ndarray:
        return self.states if self.states.ndim == 1 else self.states[:, 0]

    def state_at(self, t):
        """State at time(s) ``t`` (right-continuous)."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.states[np.maximum(idx, 0)]

    def size_integral(self) -> float:
        """Infected-time integral recomputed from the event list."""
        ends = np.append(self.times[1:], self.terminal_time)
        return float(np.sum(self.infected * (ends - self.times)))

    def violations(self, capped: bool = False) -> list[str]:
        out = []
        if len(self.times) == 0 or self.times[0] != 0.0:
            out.append("path must start at time 0")
        if np.any(np.diff(self.times) <= 0):
            out.append("event times not strictly increasing")
        if len(self.times) and self.terminal_time < self.times[-1]:
            out.append("terminal time precedes last event")
        steps = np.diff(self.states, axis=0)
        if steps.ndim == 2:
            # SIR moves: infection (+1, 0), removal (-1, +1)
            ok = ((steps[:, 0] == 1) & (steps[:, 1] == 0)) | ((steps[:, 0] == -1) & (steps[:, 1] == 1))
        else:
            ok = np.abs(steps) == 1
        if not np.all(ok):
            out.append("consecutive states must differ by one unit")
        if np.any(self.states < 0):
            out.append("negative state")
        if not capped and len(self.times) and self.infected[-1] != 0:
            out.append("uncapped path does not end absorbed")
        return out


@dataclass(frozen=True)
class EpidemicOutcome:
    duration: float
    size_integral: float
    infection_count: int
    capped: bool = False


@dataclass
class CoupledRun:
    """SIS chain ``x`` and its envelope ``z`` built on one event stream."""

    x_path: JumpPath
    z_path: JumpPath
    x_outcome: EpidemicOutcome
    z_outcome: EpidemicOutcome
    proposed_births: int
    rejected_births: int
    violations: int

    def __iter__(self):
        yield self.x_path
        yield self.z_path


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def _grow(a, n):
    if n < a.shape[0]:
        return a
    b = np.empty((2 * a.shape[0],) + a.shape[1:], dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@nb.njit(cache=True)
def _birth_death_kernel(x0, N, attenuate, beta, time_cap, checkpoints, record, gen):
    """Birth rate ``beta*x*(1-x/N)`` (or ``beta*x`` without attenuation), death rate ``x``."""
    ncp = checkpoints.shape[0]
    cp = np.zeros(ncp, dtype=np.int64)
    cap = _INITIAL_CAPACITY if record else 1
    ev_t = np.empty(cap)
    ev_x = np.empty(cap, dtype=np.int64)
    ev_t[0] = 0.0
    ev_x[0] = x0
    n_ev = 1
    x = x0
    t = 0.0
    size = 0.0
    xi = 0
    ci = 0
    capped = False
    inv_n = 1.0 / N if attenuate else 0.0
    while x > 0:
        up = beta * x * (1.0 - x * inv_n)
        tot = up + x
        t_new = t + gen.standard_exponential() / tot
        if t_new > time_cap:
            while ci < ncp and checkpoints[ci] <= time_cap:
                cp[ci] = x
                ci += 1
            size += x * (time_cap - t)
            t = time_cap
            capped = True
            break
        while ci < ncp and checkpoints[ci] < t_new:
            cp[ci] = x
            ci += 1
        size += x * (t_new - t)
        t = t_new
        if gen.random() * tot < up:
            x += 1
            xi += 1
        else:
            x -= 1
        if record:
            ev_t = _grow(ev_t, n_ev)
            ev_x = _grow(ev_x, n_ev)
            ev_t[n_ev] = t
            ev_x[n_ev] = x
            n_ev += 1
    while ci < ncp:
        cp[ci] = -1 if capped else 0
        ci += 1
    return t, size, xi, capped, cp, ev_t[:n_ev], ev_x[:n_ev]


@nb.njit(cache=True)
def _sir_kernel(i0, N, beta, time_cap, checkpoints, record, gen):
    ncp = checkpoints.shape[0]
    cp = np.zeros((ncp, 2), dtype=np.int64)
    cap = _INITIAL_CAPACITY if record else 1
    ev_t = np.empty(cap)
    ev_s = np.empty((cap, 2), dtype=np.int64)
    ev_t[0] = 0.0
    ev_s[0, 0] = i0
    ev_s[0, 1] = 0
    n_ev = 1
    i = i0
    r = 0
    t = 0.0
    size = 0.0
    xi = 0
    ci = 0
    capped = False
    while i > 0:
        up = beta * i * (N - i - r) / N
        tot = up + i
        t_new = t + gen.standard_exponential() / tot
        if t_new > time_cap:
            while ci < ncp and checkpoints[ci] <= time_cap:
                cp[ci, 0] = i
                cp[ci, 1] = r
                ci += 1
            size += i * (time_cap - t)
            t = time_cap
            capped = True
            break
        while ci < ncp and checkpoints[ci] < t_new:
            cp[ci, 0] = i
            cp[ci, 1] = r
            ci += 1
        size += i * (t_new - t)
        t = t_new
        if gen.random() * tot < up:
            i += 1
            xi += 1
        else:
            i -= 1
            r += 1
        if record:
            ev_t = _grow(ev_t, n_ev)
            ev_s = _grow(ev_s, n_ev)
            ev_t[n_ev] = t
            ev_s[n_ev, 0] = i
            ev_s[n_ev, 1] = r
            n_ev += 1
    while ci < ncp:
        if capped:
            cp[ci, 0] = -1
            cp[ci, 1] = -1
        else:
            cp[ci, 0] = 0
            cp[ci, 1] = r
        ci += 1
    return t, size, xi, capped, cp, ev_t[:n_ev], ev_s[:n_ev]


@nb.njit(cache=True)
def _coupled_kernel(x0, N, beta, time_cap, record, stop_with_sis, gen):
    """Envelope proposes every event; the SIS chain lives on a subset of its individuals.

    A birth from an individual infected in both processes is accepted by the
    SIS chain with probability ``1 - x/N``; a death removes the individual
    from the SIS chain iff it is infected there. Descendants of envelope-only
    individuals stay envelope-only, so ``x <= z`` holds after every event.
    With ``stop_with_sis`` the run ends when the SIS chain is absorbed, so the
    envelope outcome is truncated there.
    """
    cap = _INITIAL_CAPACITY if record else 1
    ev_t = np.empty(cap)
    ev_s = np.empty((cap, 2), dtype=np.int64)
    ev_t[0] = 0.0
    ev_s[0, 0] = x0
    ev_s[0, 1] = x0
    n_ev = 1
    x = x0
    z = x0
    t = 0.0
    sx = 0.0
    sz = 0.0
    xi_x = 0
    xi_z = 0
    tx = 0.0
    x_done = x0 == 0
    proposed = 0
    rejected = 0
    violations = 0
    capped = False
    while z > 0 and not (stop_with_sis and x_done):
        tot = (beta + 1.0) * z
        t_new = t + gen.standard_exponential() / tot
        if t_new > time_cap:
            sx += x * (time_cap - t)
            sz += z * (time_cap - t)
            t = time_cap
            capped = True
            break
        sx += x * (t_new - t)
        sz += z * (t_new - t)
        t = t_new
        birth = gen.random() * (beta + 1.0) < beta
        in_x = gen.random() * z < x
        if birth:
            z += 1
            xi_z += 1
            if in_x:
                proposed += 1
                if gen.random() < 1.0 - x / N:
                    x += 1
                    xi_x += 1
                else:
                    rejected += 1
        else:
            z -= 1
            if in_x:
                x -= 1
        if x > z:
            violations += 1
        if not x_done and x == 0:
            tx = t
            x_done = True
        if record:
            ev_t = _grow(ev_t, n_ev)
            ev_s = _grow(ev_s, n_ev)
            ev_t[n_ev] = t
            ev_s[n_ev, 0] = x
            ev_s[n_ev, 1] = z
            n_ev += 1
    x_capped = capped and not x_done
    if not x_done:
        tx = t
    return (tx, sx, xi_x, x_capped, t, sz, xi_z, capped,
            proposed, rejected, violations, ev_t[:n_ev], ev_s[:n_ev])


# ---------------------------------------------------------------------------
# single-path API


def _resolve_cap(time_cap, default):
    if time_cap is None:
        return default
    if not time_cap > 0:
        raise ParameterError("time_cap must be positive")
    return float(time_cap)


def simulate_sis(
    params: EpidemicParams, seed: RngSeed, time_cap: float | None = None
) -> tuple[JumpPath, EpidemicOutcome]:
    """Simulate one SIS epidemic until absorption at 0 or ``time_cap``.

    ``time_cap`` defaults to ``50 * N**alpha``; pass ``math.inf`` to disable it.
    """
    cap = _resolve_cap(time_cap, params.default_time_cap)
    gen = make_generator(seed)
    t, size, xi, capped, _, ev_t, ev_x = _birth_death_kernel(
        params.x0, params.N, True, params.beta, cap, _NO_CHECKPOINTS, True, gen
    )
    return JumpPath(ev_t, ev_x, t), EpidemicOutcome(t, size, int(xi), bool(capped))


def simulate_envelope(
    beta: float, z0: int, seed: RngSeed, time_cap: float | None = None
) -> tuple[JumpPath, EpidemicOutcome]:
    """Simulate the linear birth-death chain with birth rate ``beta*z`` and death rate ``z``.

    Uncapped by default; a supercritical chain may then run for a long time.
    """
    if beta < 0:
        raise ParameterError("beta must be nonnegative")
    if z0 < 0:
        raise ParameterError("z0 must be nonnegative")
    cap = _resolve_cap(time_cap, math.inf)
    gen = make_generator(seed)
    t, size, xi, capped, _, ev_t, ev_x = _birth_death_kernel(
        int(z0), 1, False, float(beta), cap, _NO_CHECKPOINTS, True, gen
    )
    return JumpPath(ev_t, ev_x, t), EpidemicOutcome(t, size, int(xi), bool(capped))


def simulate_sir(
    params: EpidemicParams, seed: RngSeed, time_cap: float | None = None
) -> tuple[JumpPath, EpidemicOutcome]:
    """Simulate one SIR epidemic; ``states[:, 0]`` is infected, ``states[:, 1]`` removed."""
    cap = _resolve_cap(time_cap, params.default_time_cap)
    gen = make_generator(seed)
    t, size, xi, capped, _, ev_t, ev_s = _sir_kernel(
        params.x0, params.N, params.beta, cap, _NO_CHECKPOINTS.copy(), True, gen
    )
    return JumpPath(ev_t, ev_s, t), EpidemicOutcome(t, size, int(xi), bool(capped))


def _changes_only(times, states):
    keep = np.ones(len(times), dtype=bool)
    keep[1:] = states[1:] != states[:-1]
    return times[keep], states[keep]


def simulate_coupled(
    params: EpidemicParams, seed: RngSeed, time_cap: float | None = None
) -> CoupledRun:
    """Build the SIS chain and its branching envelope on one probability space.

    Iterating the result yields ``(x_path, z_path)``.
    """
    cap = _resolve_cap(time_cap, params.default_time_cap)
    gen = make_generator(seed)
    (tx, sx, xi_x, x_capped, tz, sz, xi_z, z_capped,
     proposed, rejected, violations, ev_t, ev_s) = _coupled_kernel(
        params.x0, params.N, params.beta, cap, True, False, gen
    )
    x_times, x_states = _changes_only(ev_t, ev_s[:, 0])
    return CoupledRun(
        x_path=JumpPath(x_times, x_states, tx),
        z_path=JumpPath(ev_t.copy(), ev_s[:, 1].copy(), tz),
        x_outcome=EpidemicOutcome(tx, sx, int(xi_x), bool(x_capped)),
        z_outcome=EpidemicOutcome(tz, sz, int(xi_z), bool(z_capped)),
        proposed_births=int(proposed),
        rejected_births=int(rejected),
        violations=int(violations),
    )


# ---------------------------------------------------------------------------
# exact envelope transition law


def envelope_single_line_law(beta: float, t: float) -> tuple[float, float]:
    """Extinction probability and geometric ratio of ``Z(t)`` started from one individual.

    ``P(Z(t) = 0) = p0`` and ``P(Z(t) = n) = (1 - p0) (1 - eta) eta**(n-1)`` for n >= 1.
    """
    if t <= 0:
        return 0.0, 0.0
    if beta == 1.0:
        p = t / (1.0 + t)
        return p, p
    grow = math.expm1((beta - 1.0) * t)
    denom = beta * grow + (beta - 1.0)
    return grow / denom, beta * grow / denom


def sample_envelope_state(beta: float, z0: int, t: float, seed: RngSeed) -> int:
    """Draw ``Z(t)`` exactly from its transition law, without simulating events.

    From ``z0`` the envelope is a sum of ``z0`` independent single-line
    processes: a binomial number survive, and each survivor line is a
    geometric count on ``{1, 2, ...}``.
    """
    if beta < 0 or z0 < 0 or t < 0:
        raise ParameterError("need beta >= 0, z0 >= 0, t >= 0")
    gen = make_generator(seed)
    p0, eta = envelope_single_line_law(beta, t)
    alive = int(gen.binomial(int(z0), 1.0 - p0))
    if alive == 0:
        return 0
    return alive + int(gen.negative_binomial(alive, 1.0 - eta))


# ---------------------------------------------------------------------------
# batches


def _bd_chunk(x0, N, attenuate, beta, cap, checkpoints, master_seed, stream, start, stop):
    n = stop - start
    out = {
        "duration": np.empty(n),
        "size_integral": np.empty(n),
        "infection_count": np.empty(n, dtype=np.int64),
        "capped": np.empty(n, dtype=bool),
        "checkpoints": np.empty((n, len(checkpoints)), dtype=np.int64),
    }
    for k in range(n):
        gen = replicate_generator(master_seed, stream, start + k)
        t, size, xi, capped, cp, _, _ = _birth_death_kernel(
            x0, N, attenuate, beta, cap, checkpoints, False, gen
        )
        out["duration"][k] = t
        out["size_integral"][k] = size
        out["infection_count"][k] = xi
        out["capped"][k] = capped
        out["checkpoints"][k] = cp
    return out


def _sir_chunk(i0, N, beta, cap, checkpoints, master_seed, start, stop):
    n = stop - start
    out = {
        "duration": np.empty(n),
        "size_integral": np.empty(n),
        "infection_count": np.empty(n, dtype=np.int64),
        "capped": np.empty(n, dtype=bool),
        "checkpoints": np.empty((n, len(checkpoints), 2), dtype=np.int64),
    }
    for k in range(n):
        gen = replicate_generator(master_seed, "sir", start + k)
        t, size, xi, capped, cp, _, _ = _sir_kernel(i0, N, beta, cap, checkpoints, False, gen)
        out["duration"][k] = t
        out["size_integral"][k] = size
        out["infection_count"][k] = xi
        out["capped"][k] = capped
        out["checkpoints"][k] = cp
    return out


def _coupled_chunk(x0, N, beta, cap, stop_with_sis, master_seed, start, stop):
    n = stop - start
    keys = ("x_duration", "x_size", "x_infections", "x_capped",
            "z_duration", "z_size", "z_infections", "z_capped",
            "proposed_births", "rejected_births", "violations")
    out = {k: np.empty(n) for k in keys}
    for k in range(n):
        gen = replicate_generator(master_seed, "coupled", start + k)
        res = _coupled_kernel(x0, N, beta, cap, False, stop_with_sis, gen)
        for key, val in zip(keys, res[:11]):
            out[key][k] = val
    for key in ("x_infections", "z_infections", "proposed_births", "rejected_births", "violations"):
        out[key] = out[key].astype(np.int64)
    out["x_capped"] = out["x_capped"].astype(bool)
    out["z_capped"] = out["z_capped"].astype(bool)
    return out


def _as_checkpoints(checkpoints):
    cps = np.asarray(checkpoints if checkpoints is not None else [], dtype=float).ravel()
    if np.any(np.diff(cps) < 0) or np.any(cps < 0):
        raise ParameterError("checkpoints must be nonnegative and sorted")
    return cps


def sis_batch(
    params: EpidemicParams,
    replicates: int,
    master_seed: int,
    checkpoints=None,
    time_cap: float | None = None,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Outcome-only SIS replicates.

    Returns arrays ``duration``, ``size_integral``, ``infection_count``,
    ``capped`` and ``checkpoints`` (state at each requested unscaled time;
    -1 where the replicate was capped before that time).
    """
    cap = _resolve_cap(time_cap, params.default_time_cap)
    job = partial(_bd_chunk, params.x0, params.N, True, params.beta, cap,
                  _as_checkpoints(checkpoints), master_seed, "sis")
    return map_replicates(job, replicates, workers)


def envelope_batch(
    beta: float,
    z0: int,
    replicates: int,
    master_seed: int,
    checkpoints=None,
    time_cap: float | None = None,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    cap = _resolve_cap(time_cap, math.inf)
    job = partial(_bd_chunk, int(z0), 1, False, float(beta), cap,
                  _as_checkpoints(checkpoints), master_seed, "envelope")
    return map_replicates(job, replicates, workers)


def sir_batch(
    params: EpidemicParams,
    replicates: int,
    master_seed: int,
    checkpoints=None,
    time_cap: float | None = None,
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Outcome-only SIR replicates; ``checkpoints`` has shape ``(replicates, k, 2)``."""
    cap = _resolve_cap(time_cap, params.default_time_cap)
    job = partial(_sir_chunk, params.x0, params.N, params.beta, cap,
                  _as_checkpoints(checkpoints), master_seed)
    return map_replicates(job, replicates, workers)


def coupled_batch(
    params: EpidemicParams,
    replicates: int,
    master_seed: int,
    time_cap: float | None = None,
    workers: int = 1,
    stop_with_sis: bool = False,
) -> dict[str, np.ndarray]:
    """Coupled replicates; ``stop_with_sis`` ends each run at SIS absorption."""
    cap = _resolve_cap(time_cap, params.default_time_cap)
    job = partial(_coupled_chunk, params.x0, params.N, params.beta, cap, bool(stop_with_sis), master_seed)
    return map_replicates(job, replicates, workers)


def _envelope_exact_chunk(beta, z0, t, master_seed, start, stop):
    p0, eta = envelope_single_line_law(beta, t)
    out = np.empty(stop - start, dtype=np.int64)
    for k in range(stop - start):
        gen = replicate_generator(master_seed, "envelope_exact", start + k)
        alive = int(gen.binomial(z0, 1.0 - p0))
        out[k] = alive + int(gen.negative_binomial(alive, 1.0 - eta)) if alive else 0
    return {"state": out}


def envelope_marginal_batch(
    beta: float, z0: int, t: float, replicates: int, master_seed: int, workers: int = 1
) -> np.ndarray:
    """Exact draws of the envelope state at time ``t`` for each replicate."""
    job = partial(_envelope_exact_chunk, float(beta), int(z0), float(t), master_seed)
    return map_replicates(job, replicates, workers)["state"]
