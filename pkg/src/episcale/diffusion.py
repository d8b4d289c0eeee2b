"""Euler-Maruyama integration of the diffusion limits.

Kinds and their dynamics (``noise`` is the variance coefficient ``c``):

``feller``             dY = lam Y dt + sqrt(c Y) dW
``attenuated_feller``  dY = (lam Y - Y^2) dt + sqrt(c Y) dW
``ou``                 dU = -U dt + sqrt(c) dW                  (lam ignored)
``sir_limit``          dI = (lam I - I R) dt + sqrt(c I) dW,  dR = I dt
``ml_wiener``          dJ = (lam - s) ds + sqrt(c) dW            (J absorbed at 0)

The unit-rate chains have variance rate ``2x`` per unit time, so the
population kinds default to ``c = 2``; ``ou`` defaults to the standard
process, ``c = 1``. Pass ``noise=1`` to the population kinds for the
``sqrt(Y) dW`` normalization.

Square-root kinds use full truncation (coefficients evaluated at
``max(Y, 0)``) and are absorbed at the first step with ``Y <= 0``; the value
is then frozen at 0. ``ml_wiener`` is absorbed the same way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numba as nb
import numpy as np

from .errors import ParameterError
from .rng import RngSeed, make_generator, map_replicates, replicate_generator

FELLER, ATTENUATED_FELLER, OU, SIR_LIMIT, ML_WIENER = range(5)
KINDS = {
    "feller": FELLER,
    "attenuated_feller": ATTENUATED_FELLER,
    "ou": OU,
    "sir_limit": SIR_LIMIT,
    "ml_wiener": ML_WIENER,
}
CHAIN_NOISE = 2.0
UNIT_NOISE = 1.0
DEFAULT_STEP = 1e-3
DEFAULT_TIME_CAP = 50.0


@dataclass(frozen=True)
class DiffusionSpec:
    kind: str
    lam: float = 0.0
    y0: float | tuple[float, float] = 1.0
    step: float = DEFAULT_STEP
    time_cap: float = DEFAULT_TIME_CAP
    noise: Optional[float] = None

    def __post_init__(self):
        problems = spec_violations(self.kind, self.y0, self.step, self.time_cap, self.noise)
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    @property
    def noise_coefficient(self) -> float:
        if self.noise is not None:
            return float(self.noise)
        return 1.0 if self.kind == "ou" else CHAIN_NOISE

    @property
    def initial(self) -> tuple[float, float]:
        if self.kind == "sir_limit":
            i0, r0 = self.y0 if np.ndim(self.y0) else (self.y0, 0.0)
            return float(i0), float(r0)
        return float(self.y0), 0.0

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.time_cap / self.step - 1e-9))

    @property
    def absorbing(self) -> bool:
        return self.kind != "ou"


def spec_violations(kind, y0, step, time_cap, noise=None) -> list[str]:
    problems = []
    if kind not in KINDS:
        return [f"kind must be one of {sorted(KINDS)}"]
    if kind == "sir_limit" and np.ndim(y0):
        if len(y0) != 2 or min(y0) < 0:
            problems.append("sir_limit y0 must be a nonnegative pair (I0, R0)")
    elif np.ndim(y0):
        problems.append("y0 must be a scalar for this kind")
    elif kind != "ou" and y0 < 0:
        problems.append("y0 must be nonnegative")
    if not step > 0:
        problems.append("step must be positive")
    elif step > 1e-2:
        problems.append("step must be ≤ 1e-2")
    if not time_cap > 0:
        problems.append("time_cap must be positive")
    elif step > 0 and step > time_cap:
        problems.append("step must not exceed time_cap")
    if noise is not None and not noise > 0:
        problems.append("noise must be positive")
    return problems


@dataclass
class DiffusionPath:
    """Sample path on a uniform grid ``grid[k] = k * step``.

    ``values`` has shape ``(n,)`` or ``(n, 2)`` for ``sir_limit``.
    ``size_integral`` is the trapezoidal integral of the (first) coordinate
    up to absorption or the end of the grid.
    """

    grid: np.ndarray
    values: np.ndarray
    absorbed_at: Optional[float]
    size_integral: float

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if len(self.grid) > 1 else 0.0

    @property
    def primary(self) -> np.ndarray:
        return self.values if self.values.ndim == 1 else self.values[:, 0]


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def drift(kind, lam, y, r, s):
    if kind == FELLER:
        return lam * y
    if kind == ATTENUATED_FELLER:
        return lam * y - y * y
    if kind == OU:
        return -y
    if kind == SIR_LIMIT:
        return lam * y - y * r
    return lam - s


@nb.njit(cache=True)
def volatility(kind, noise, y):
    if kind == OU or kind == ML_WIENER:
        return math.sqrt(noise)
    return math.sqrt(noise * y)


@nb.njit(cache=True)
def _euler_kernel(kind, lam, noise, y0, r0, step, n_steps, keep_path,
                  checkpoint_idx, level, from_above, stop_at_passage, bridge, gen):
    """One Euler path.

    Returns (values, r_values, absorbed_step, size, checkpoint y, checkpoint r,
    passage time, bridge passage time). ``absorbed_step`` is -1 when the path
    is never absorbed; passage times are NaN when ``level`` is not crossed in
    the stated direction.

    With ``bridge`` set, a step whose endpoints both lie on the starting side
    of ``level`` also counts as a crossing with the Brownian-bridge
    probability ``exp(-2 d0 d1 / (sigma^2 step))``, ``d0, d1`` being the
    endpoint distances and ``sigma`` the volatility at the step start; the
    crossing time is then the step midpoint. The plain grid-crossing time is
    still reported and, with ``stop_at_passage``, ends the path.
    """
    absorbing = kind != OU
    n_keep = n_steps + 1 if keep_path else 1
    ys = np.zeros(n_keep)
    rs = np.zeros(n_keep)
    ncp = checkpoint_idx.shape[0]
    cp_y = np.zeros(ncp)
    cp_r = np.zeros(ncp)
    sqrt_dt = math.sqrt(step)
    y = y0
    r = r0
    size = 0.0
    passage = np.nan
    passage_bridge = np.nan
    absorbed = -1
    ci = 0
    if absorbing and y <= 0.0:
        y = 0.0
        absorbed = 0
    if not math.isnan(level):
        if (from_above and y <= level) or (not from_above and y >= level):
            passage = 0.0
            passage_bridge = 0.0
    ys[0] = y
    rs[0] = r
    while ci < ncp and checkpoint_idx[ci] == 0:
        cp_y[ci] = y
        cp_r[ci] = r
        ci += 1
    k = 0
    while k < n_steps and absorbed < 0:
        if stop_at_passage and not math.isnan(passage):
            break
        ye = max(y, 0.0) if absorbing else y
        s = k * step
        vol = volatility(kind, noise, ye)
        y_new = y + drift(kind, lam, ye, r, s) * step + vol * sqrt_dt * gen.standard_normal()
        if absorbing and y_new <= 0.0:
            y_new = 0.0
            absorbed = k + 1
        if math.isnan(passage) and not math.isnan(level):
            if from_above and y > level and y_new <= level:
                passage = s + step * (y - level) / (y - y_new)
            elif not from_above and y < level and y_new >= level:
                passage = s + step * (level - y) / (y_new - y)
            if math.isnan(passage_bridge):
                if not math.isnan(passage):
                    passage_bridge = passage
                elif bridge and vol > 0.0:
                    expo = 2.0 * (y - level) * (y_new - level) / (vol * vol * step)
                    if expo < 40.0 and gen.random() < math.exp(-expo):
                        passage_bridge = s + 0.5 * step
        size += 0.5 * (y + y_new) * step
        if kind == SIR_LIMIT:
            r += 0.5 * (y + y_new) * step
        y = y_new
        k += 1
        if keep_path:
            ys[k] = y
            rs[k] = r
        while ci < ncp and checkpoint_idx[ci] <= k:
            cp_y[ci] = y
            cp_r[ci] = r
            ci += 1
    # frozen after absorption: y = 0, r constant
    while ci < ncp:
        cp_y[ci] = y if absorbed >= 0 else np.nan
        cp_r[ci] = r if absorbed >= 0 else np.nan
        ci += 1
    if keep_path and absorbed >= 0:
        for j in range(absorbed + 1, n_steps + 1):
            ys[j] = 0.0
            rs[j] = r
    return ys, rs, absorbed, size, cp_y, cp_r, passage, passage_bridge


_NO_INDEX = np.zeros(0, dtype=np.int64)


def integrate(spec: DiffusionSpec, seed: RngSeed) -> DiffusionPath:
    """Integrate ``spec`` on its full grid and return the path."""
    gen = make_generator(seed)
    y0, r0 = spec.initial
    ys, rs, absorbed, size, _, _, _, _ = _euler_kernel(
        spec.code, float(spec.lam), spec.noise_coefficient, y0, r0, float(spec.step),
        spec.n_steps, True, _NO_INDEX, np.nan, True, False, False, gen,
    )
    grid = np.arange(spec.n_steps + 1) * spec.step
    values = np.column_stack([ys, rs]) if spec.kind == "sir_limit" else ys
    absorbed_at = float(grid[absorbed]) if absorbed >= 0 else None
    return DiffusionPath(grid, values, absorbed_at, float(size))


def first_passage(path: DiffusionPath, level: float, from_above: bool = True) -> Optional[float]:
    """First time the path crosses ``level`` in the given direction.

    A path that starts at or beyond the level has passage time 0. The
    crossing time is interpolated linearly between the bracketing grid
    points. Returns None when no crossing occurs on the grid.
    """
    y = path.primary
    if len(y) == 0:
        return None
    beyond = y <= level if from_above else y >= level
    hits = np.flatnonzero(beyond)
    if len(hits) == 0:
        return None
    k = int(hits[0])
    if k == 0:
        return float(path.grid[0])
    t0, t1 = path.grid[k - 1], path.grid[k]
    y0, y1 = y[k - 1], y[k]
    return float(t0 + (t1 - t0) * (y0 - level) / (y0 - y1))


def size_of(path: DiffusionPath) -> float:
    """Trapezoidal integral of the path up to absorption (or the grid end)."""
    y = path.primary
    if len(y) < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(path.grid)))


def time_change(path: DiffusionPath, step: float | None = None) -> DiffusionPath:
    """Reparametrize a nonnegative path by accumulated area ``ds = Y dt``.

    The clock ``s(t)`` is the cumulative trapezoid of ``Y``; the returned path
    holds ``V(s) = Y(t(s))`` on a uniform ``s`` grid (default spacing: the
    input step), with its last point at the total area. ``absorbed_at`` is the
    total area when the input was absorbed.
    """
    y = path.primary
    if len(y) < 2 or y[0] == 0.0:
        return DiffusionPath(np.zeros(1), np.zeros(1), 0.0 if path.absorbed_at is not None else None, 0.0)
    clock = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(path.grid))])
    extent = clock[-1]
    ds = step or path.step
    n = int(math.floor(extent / ds))
    s_grid = np.arange(n + 1) * ds
    if s_grid[-1] < extent:
        s_grid = np.append(s_grid, extent)
    # clock is flat only where Y == 0 (after absorption), so take the first
    # grid index reaching each s to keep V well defined.
    keep = np.concatenate([[True], np.diff(clock) > 0])
    v = np.interp(s_grid, clock[keep], y[keep])
    absorbed = extent if path.absorbed_at is not None else None
    if absorbed is not None:
        v[-1] = 0.0
    size = float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(s_grid))) if len(v) > 1 else 0.0
    return DiffusionPath(s_grid, v, absorbed, size)


# ---------------------------------------------------------------------------
# batches


def _euler_chunk(code, lam, noise, y0, r0, step, n_steps, cp_idx, level, from_above,
                 stop_at_passage, bridge, master_seed, stream, start, stop):
    n = stop - start
    out = {
        "absorbed_at": np.full(n, np.nan),
        "size_integral": np.empty(n),
        "passage": np.full(n, np.nan),
        "passage_bridge": np.full(n, np.nan),
        "checkpoint_y": np.empty((n, len(cp_idx))),
        "checkpoint_r": np.empty((n, len(cp_idx))),
    }
    for k in range(n):
        gen = replicate_generator(master_seed, stream, start + k)
        _, _, absorbed, size, cy, cr, passage, passage_bridge = _euler_kernel(
            code, lam, noise, y0, r0, step, n_steps, False, cp_idx, level,
            from_above, stop_at_passage, bridge, gen,
        )
        if absorbed >= 0:
            out["absorbed_at"][k] = absorbed * step
        out["size_integral"][k] = size
        out["passage"][k] = passage
        out["passage_bridge"][k] = passage_bridge
        out["checkpoint_y"][k] = cy
        out["checkpoint_r"][k] = cr
    return out


def sample_batch(
    spec: DiffusionSpec,
    replicates: int,
    master_seed: int,
    checkpoints=None,
    level: float | None = None,
    from_above: bool = True,
    stop_at_passage: bool = False,
    bridge: bool = False,
    stream: str = "diffusion",
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Summary statistics of many independent paths without storing them.

    Returns ``absorbed_at`` (NaN if not absorbed by ``time_cap``),
    ``size_integral``, ``passage`` (first grid crossing of ``level``,
    interpolated; NaN if none), ``passage_bridge`` (bridge-corrected crossing
    when ``bridge`` is set, else equal to ``passage``),
    and ``checkpoint_y`` / ``checkpoint_r`` at the grid points nearest the
    requested times (NaN for times never reached before a passage stop).
    """
    cps = np.asarray(checkpoints if checkpoints is not None else [], dtype=float).ravel()
    if np.any(cps < 0) or np.any(np.diff(cps) < 0) or np.any(cps > spec.time_cap + 1e-12):
        raise ParameterError("checkpoints must be sorted and within [0, time_cap]")
    cp_idx = np.rint(cps / spec.step).astype(np.int64)
    y0, r0 = spec.initial
    job = partial(
        _euler_chunk, spec.code, float(spec.lam), spec.noise_coefficient, y0, r0,
        float(spec.step), spec.n_steps, cp_idx,
        np.nan if level is None else float(level), bool(from_above), bool(stop_at_passage),
        bool(bridge), master_seed, stream,
    )
    return map_replicates(job, replicates, workers)
