"""Truncated Poisson jump stream: atoms (s, r, u) with r above a cutoff delta.

Jump times are exponential at the total truncated activity; r is drawn by
inverse CDF of the normalized r^-2-weighted measure above delta (an exact
categorical for atoms, a monotone-cubic table for density parts); u is an
independent uniform.  The table is built once here and evaluated identically
by both engine backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import BudgetUnreachable, OutOfRange, ZeroActivity
from .measure import LambdaMeasure

N_KNOTS = 4096  # inverse-CDF table resolution for density parts
_EDGE = 1e-12  # untabulated sliver below 1; its mass is folded into the last cell


@dataclass(frozen=True)
class Jump:
    s: float
    r: float
    u: float


@dataclass
class JumpStreamConfig:
    delta: float
    horizon: float
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise OutOfRange(f"delta must lie in (0,1), got {self.delta}")
        if not (self.horizon > 0.0):
            raise OutOfRange(f"horizon must be positive, got {self.horizon}")


@dataclass
class SamplerTables:
    """Flat arrays consumed by the engine cores; see the draw protocol there."""

    delta: float
    rate: float  # total jump activity above delta
    p_disc: float  # probability mass of the categorical branch
    disc_cum: np.ndarray
    disc_r: np.ndarray
    inv_x: np.ndarray  # CDF breakpoints of the inverse table
    inv_c: np.ndarray  # (4, len(inv_x) - 1) cubic coefficients, highest power first


def _density_increments(beta_parts, knots):
    """Per-interval integrals of the r^-2-weighted density via 16-pt Gauss-Legendre."""
    gx, gw = np.polynomial.legendre.leggauss(16)
    lo, hi = knots[:-1], knots[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * gx[None, :]
    dens = np.zeros_like(pts)
    for bp in beta_parts:
        dens += bp.coef * np.exp(
            (bp.a - 3.0) * np.log(pts) + (bp.b - 1.0) * np.log1p(-pts)
        )
    return (dens * gw[None, :]).sum(axis=1) * half


def build_sampler(m: LambdaMeasure, delta: float) -> SamplerTables:
    if not (0.0 < delta < 1.0 - 1e-9):
        raise OutOfRange(f"delta must lie in (0,1), got {delta}")
    disc = sorted((r, w / (r * r)) for r, w in m.atoms if r > delta)
    disc_rate = sum(q for _, q in disc)
    disc_r = np.array([r for r, _ in disc])
    disc_cum = np.cumsum([q for _, q in disc])
    if len(disc_cum):
        disc_cum = disc_cum / disc_cum[-1]
        disc_cum[-1] = 1.0

    inv_x = np.empty(0)
    inv_c = np.empty((4, 0))
    cont_rate = 0.0
    if m.beta_parts:
        hi = 1.0 - _EDGE
        if delta < 0.5:
            nl = N_KNOTS // 2
            left = np.exp(np.linspace(math.log(delta), math.log(0.5), nl + 1))
            right = 1.0 - np.exp(
                np.linspace(math.log(0.5), math.log(_EDGE), N_KNOTS - nl + 1)
            )
            knots = np.concatenate([left[:-1], right])
        else:
            knots = 1.0 - np.exp(
                np.linspace(math.log(1.0 - delta), math.log(_EDGE), N_KNOTS + 1)
            )
        knots[0], knots[-1] = delta, hi
        inc = _density_increments(m.beta_parts, knots)
        # analytic mass of the untabulated sliver (1 - _EDGE, 1)
        inc[-1] += sum(bp.coef * _EDGE**bp.b / bp.b for bp in m.beta_parts)
        cont_rate = float(inc.sum())
        cdf = np.concatenate([[0.0], np.cumsum(inc)]) / cont_rate
        cdf[-1] = 1.0
        interp = PchipInterpolator(cdf, knots)
        inv_x = interp.x
        inv_c = np.ascontiguousarray(interp.c)

    rate = disc_rate + cont_rate
    p_disc = disc_rate / rate if rate > 0.0 else 0.0
    if not m.beta_parts:
        p_disc = 1.0 if rate > 0.0 else 0.0
    return SamplerTables(
        delta=delta,
        rate=rate,
        p_disc=p_disc,
        disc_cum=np.asarray(disc_cum, dtype=float),
        disc_r=np.asarray(disc_r, dtype=float),
        inv_x=np.asarray(inv_x, dtype=float),
        inv_c=np.asarray(inv_c, dtype=float),
    )


def make_bitgen(seed: int, stream_id: int = 0):
    """Counter-based generator keyed by (seed, stream_id); replicates are
    independent and reproducible regardless of scheduling."""
    return np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream_id,)))


class JumpStream:
    """Single-cursor generator of the truncated jump stream up to a horizon."""

    def __init__(self, m: LambdaMeasure, config: JumpStreamConfig):
        self.config = config
        self.sampler = build_sampler(m, config.delta)
        if self.sampler.rate <= 0.0:
            raise ZeroActivity(f"no activity above delta={config.delta}")
        self._next_double = np.random.Generator(
            make_bitgen(config.seed, config.stream_id)
        ).random
        self.t = 0.0
        self.exhausted = False

    def next_jump(self):
        """Next jump, or None once the horizon is passed."""
        if self.exhausted:
            return None
        from ._pycore import draw_r  # single shared implementation of the r draw

        nd = self._next_double
        tn = self.t - math.log1p(-nd()) / self.sampler.rate
        if tn > self.config.horizon:
            self.exhausted = True
            return None
        r = draw_r(nd, self.sampler)
        u = nd()
        self.t = tn
        return Jump(tn, r, u)

    def __iter__(self):
        while True:
            j = self.next_jump()
            if j is None:
                return
            yield j


# Candidate truncation levels: an eighth-of-a-decade geometric ladder, plus
# half of each atom position so purely atomic measures truncate just below
# their smallest kept atom.
_LADDER = [10.0 ** (-i / 8.0) for i in range(1, 97)]


def delta_for_budget(m: LambdaMeasure, horizon: float, eps_mass: float) -> float:
    """Largest tabulated delta whose omitted mass over [0, horizon] stays
    within eps_mass."""
    if eps_mass <= 0.0:
        raise OutOfRange(f"eps_mass must be positive, got {eps_mass}")
    if horizon <= 0.0:
        raise OutOfRange(f"horizon must be positive, got {horizon}")
    candidates = sorted(
        set(_LADDER) | {r / 2.0 for r, _ in m.atoms}, reverse=True
    )
    for delta in candidates:
        if not (0.0 < delta < 1.0):
            continue
        if horizon * m.omitted_mass_rate(delta) <= eps_mass:
            return delta
    raise BudgetUnreachable(
        f"even delta={candidates[-1]:g} omits more than {eps_mass:g} over [0,{horizon:g}]"
    )


def write_jump_csv(path, jumps):
    """Dump a jump trace: header s,r,u, one row per jump, 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write("s,r,u\n")
        for j in jumps:
            fh.write(f"{j.s:.17g},{j.r:.17g},{j.u:.17g}\n")
