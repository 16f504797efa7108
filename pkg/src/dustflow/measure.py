"""Driving measures on (0,1) and their rate functionals.

A measure is either a (weighted) beta density c * r^(a-1) (1-r)^(b-1) dr, a
finite collection of atoms, or a mixture of such parts.  Everything downstream
(jump sampling, kernels, asymptotic targets) is a functional of this object,
so all closed forms and quadratures live here.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import (
    CapExceeded,
    DegenerateTotalMerge,
    DivergentIntegral,
    EmptyMeasure,
    NoDust,
    OutOfRange,
)

# Inner cutoff for quadrature at the r -> 0 endpoint; the sliver (0, EPSQ] is
# integrated analytically from the known density exponent.
EPSQ = 1e-12

_QUAD_OPTS = dict(epsabs=1e-13, epsrel=1e-11, limit=200)


def _signed_beta(x: float, y: float) -> float:
    """Gamma(x)Gamma(y)/Gamma(x+y), valid for negative non-integer arguments.

    Returns 0.0 when x + y hits a pole of Gamma (the analytic continuation
    vanishes there).
    """
    sgn = special.gammasgn(x) * special.gammasgn(y) * special.gammasgn(x + y)
    if sgn == 0.0:
        return 0.0
    mag = special.gammaln(x) + special.gammaln(y) - special.gammaln(x + y)
    return float(sgn * np.exp(mag))


def _binom_tail2(k: int, r) -> np.ndarray | float:
    """P(Binom(k, r) >= 2), computed without cancellation for small r."""
    if k < 2:
        return np.zeros_like(r) if np.ndim(r) else 0.0
    return special.betainc(2.0, k - 1.0, r) if k > 2 else np.asarray(r) ** 2


@dataclass(frozen=True)
class _BetaPart:
    coef: float  # multiplicative weight of this density component
    a: float
    b: float

    def density(self, r):
        r = np.asarray(r, dtype=float)
        return self.coef * np.exp((self.a - 1.0) * np.log(r) + (self.b - 1.0) * np.log1p(-r))

    def quad(self, rshift: float, bshift: float, lo: float, hi: float) -> float:
        """integral of coef * r^(a-1+rshift) (1-r)^(b-1+bshift) dr over (lo, hi).

        lo == 0.0 triggers analytic treatment of (0, EPSQ].
        """
        p = self.a - 1.0 + rshift
        q = self.b - 1.0 + bshift
        extra = 0.0
        if lo == 0.0:
            if p <= -1.0:
                raise DivergentIntegral(
                    f"integral of r^{p:g} near 0 diverges for beta({self.a:g},{self.b:g})"
                )
            cut = min(EPSQ, hi)
            extra = self.coef * cut ** (p + 1.0) / (p + 1.0)
            lo = cut
            if lo >= hi:
                return extra
        c = self.coef

        def f(r):
            return c * r**p * (1.0 - r) ** q

        val, _ = integrate.quad(f, lo, hi, **_QUAD_OPTS)
        return val + extra


class LambdaMeasure:
    """A finite measure on (0,1) driving the merge dynamics.

    Use :func:`validate` (or :meth:`from_spec`) to construct one from a JSON
    spec; instances are immutable and safe to share across workers.
    """

    def __init__(self, kind, beta_parts, atoms, spec, analysis_only=False):
        self.kind = kind
        self.beta_parts = tuple(beta_parts)
        self.atoms = tuple(atoms)  # (position r_i, weight w_i)
        self.spec = spec
        self.analysis_only = analysis_only
        self.has_dust = all(p.a > 1.0 for p in self.beta_parts)
        self.finitely_many_blocks = all(p.a > 2.0 for p in self.beta_parts)
        self.h_integrable = all(p.a > 1.5 for p in self.beta_parts)
        self._cache = {}

    # -- construction -----------------------------------------------------

    @classmethod
    def from_spec(cls, spec, analysis_only=False):
        if isinstance(spec, str):
            spec = json.loads(spec)
        beta_parts, atoms = [], []
        cls._collect(spec, 1.0, beta_parts, atoms)
        if not beta_parts and not atoms:
            raise EmptyMeasure("measure spec carries no mass")
        m = cls(spec.get("kind", "?"), beta_parts, atoms, spec, analysis_only=analysis_only)
        if not m.has_dust and not analysis_only:
            raise NoDust("no dust: H(Lambda) diverges")
        return m

    @staticmethod
    def _collect(spec, weight, beta_parts, atoms):
        if weight <= 0.0 or not math.isfinite(weight):
            raise OutOfRange(f"mixture weight must be positive, got {weight!r}")
        kind = spec.get("kind")
        if kind == "beta":
            a, b = float(spec["a"]), float(spec["b"])
            if not (a > 0.0 and b > 0.0 and math.isfinite(a) and math.isfinite(b)):
                raise OutOfRange(f"beta parameters must be positive, got a={a!r} b={b!r}")
            beta_parts.append(_BetaPart(weight, a, b))
        elif kind == "atomic":
            entries = spec.get("atoms", [])
            if not entries:
                raise EmptyMeasure("atomic measure with no atoms")
            for r, w in entries:
                r, w = float(r), float(w)
                if r == 1.0:
                    raise DegenerateTotalMerge("atom at r = 1 merges everything at once")
                if not (0.0 < r < 1.0):
                    raise OutOfRange(f"atom position must lie in (0,1), got {r!r}")
                if not (w > 0.0 and math.isfinite(w)):
                    raise OutOfRange(f"atom weight must be positive, got {w!r}")
                atoms.append((r, weight * w))
        elif kind == "mixture":
            parts = spec.get("parts", [])
            if not parts:
                raise EmptyMeasure("mixture with no parts")
            for part in parts:
                LambdaMeasure._collect(
                    part["measure"], weight * float(part["weight"]), beta_parts, atoms
                )
        else:
            raise OutOfRange(f"unknown measure kind {kind!r}")

    def spec_json(self) -> str:
        return json.dumps(self.spec, sort_keys=True)

    def __repr__(self):
        return f"LambdaMeasure({json.dumps(self.spec)})"

    # -- basic functionals -------------------------------------------------

    @property
    def total_mass(self) -> float:
        """Mass of (0,1); equals the pair merge rate."""
        if "total_mass" not in self._cache:
            v = sum(p.coef * math.exp(special.betaln(p.a, p.b)) for p in self.beta_parts)
            v += sum(w for _, w in self.atoms)
            self._cache["total_mass"] = v
        return self._cache["total_mass"]

    def merge_rate(self, p: int, k: int) -> float:
        """Rate at which a given set of k blocks out of p merges:
        integral of r^(k-2) (1-r)^(p-k) against the measure."""
        if not (2 <= k <= p):
            raise OutOfRange(f"need 2 <= k <= p, got p={p} k={k}")
        v = sum(
            bp.coef * math.exp(special.betaln(bp.a + k - 2.0, bp.b + p - k))
            for bp in self.beta_parts
        )
        v += sum(w * r ** (k - 2) * (1.0 - r) ** (p - k) for r, w in self.atoms)
        return v

    def total_rate(self, k: int) -> float:
        """Total transition rate out of a configuration with k blocks:
        integral of (1 - (1-r)^k - k r (1-r)^(k-1)) r^-2 against the measure."""
        if k < 1:
            raise OutOfRange(f"k must be >= 1, got {k}")
        if k == 1:
            return 0.0
        v = 0.0
        for bp in self.beta_parts:
            alpha = bp.b
            if abs(bp.a + bp.b - 2.0) <= 1e-12 and 0.0 < alpha < 1.0:
                # closed form for the a = 2 - alpha, b = alpha family
                mag = special.gammaln(1.0 - alpha) + special.gammaln(k + alpha) - special.gammaln(k)
                v += bp.coef * math.exp(mag) * (k - 1.0) * (1.0 - alpha) / (alpha * (alpha + k - 1.0))
            else:
                # sum of binomial-weighted pairwise rates, all terms positive
                lk = math.lgamma(k + 1.0)
                acc = 0.0
                for ell in range(2, k + 1):
                    acc += math.exp(
                        lk
                        - math.lgamma(ell + 1.0)
                        - math.lgamma(k - ell + 1.0)
                        + special.betaln(bp.a + ell - 2.0, bp.b + k - ell)
                    )
                v += bp.coef * acc
        for r, w in self.atoms:
            v += w * float(_binom_tail2(k, r)) / (r * r)
        return v

    def total_rate_quad(self, k: int) -> float:
        """Quadrature cross-check path for :meth:`total_rate` (density parts)."""
        if k < 1:
            raise OutOfRange(f"k must be >= 1, got {k}")
        if k == 1:
            return 0.0
        v = 0.0
        for bp in self.beta_parts:

            def f(r, bp=bp):
                return float(_binom_tail2(k, r)) * bp.coef * r ** (bp.a - 3.0) * (1.0 - r) ** (
                    bp.b - 1.0
                )

            val, _ = integrate.quad(f, EPSQ, 1.0, **_QUAD_OPTS)
            # analytic sliver: integrand ~ C(k,2) r^(a-1) near 0
            val += math.comb(k, 2) * bp.coef * EPSQ**bp.a / bp.a
            v += val
        for r, w in self.atoms:
            v += w * float(_binom_tail2(k, r)) / (r * r)
        return v

    def laplace_exponent(self, lam: float) -> float:
        """integral of (1 - (1-r)^lam) r^-2 against the measure."""
        if lam < 0.0:
            raise OutOfRange(f"lam must be >= 0, got {lam}")
        if lam == 0.0:
            return 0.0
        if not self.has_dust:
            raise DivergentIntegral("dust condition fails: the exponent diverges")
        v = 0.0
        for bp in self.beta_parts:
            c = bp.a - 2.0
            if abs(c) < 1e-12:
                v += bp.coef * float(special.digamma(bp.b + lam) - special.digamma(bp.b))
            elif lam < 1e-8:
                # difference of beta functions cancels badly; integrate directly
                def f(r, bp=bp):
                    return -math.expm1(lam * math.log1p(-r)) * bp.coef * r ** (
                        bp.a - 3.0
                    ) * (1.0 - r) ** (bp.b - 1.0)

                val, _ = integrate.quad(f, EPSQ, 1.0, **_QUAD_OPTS)
                v += val + lam * bp.coef * EPSQ ** (bp.a - 1.0) / (bp.a - 1.0)
            else:
                v += bp.coef * (_signed_beta(c, bp.b) - _signed_beta(c, bp.b + lam))
        for r, w in self.atoms:
            v += -math.expm1(lam * math.log1p(-r)) * w / (r * r)
        return v

    def dust_rate(self) -> float:
        """Exponential decay rate of the expected dust mass (same code path as
        laplace_exponent at 1)."""
        if "dust_rate" not in self._cache:
            self._cache["dust_rate"] = self.laplace_exponent(1.0)
        return self._cache["dust_rate"]

    def dust_rate_quad(self) -> float:
        """Divergence-detecting quadrature path for the dust rate.

        Declares divergence when partial integrals over (eps, 1) exceed 1e12
        or fail to Cauchy-converge across refinements of eps.
        """
        v = sum(w / r for r, w in self.atoms)
        for bp in self.beta_parts:
            partials = []
            for eps in (1e-3, 1e-6, 1e-9, 1e-12):
                def f(r, bp=bp):
                    return bp.coef * r ** (bp.a - 2.0) * (1.0 - r) ** (bp.b - 1.0)

                val, _ = integrate.quad(f, eps, 1.0, **_QUAD_OPTS)
                partials.append(val)
                if val > 1e12:
                    raise DivergentIntegral("partial dust integral exceeds 1e12")
            gaps = np.diff(partials)
            if len(gaps) >= 2 and not (abs(gaps[-1]) < 0.5 * abs(gaps[-2]) + 1e-9):
                raise DivergentIntegral("dust integral fails to Cauchy-converge")
            v += partials[-1] + gaps[-1]  # extrapolate the last refinement step
        return v

    # -- cutoff index ------------------------------------------------------

    def rate_table(self, k_cap: int):
        if k_cap < 3:
            raise OutOfRange(f"k_cap must be >= 3, got {k_cap}")
        if not self.has_dust:
            raise NoDust("cutoff index undefined without dust")
        H = self.dust_rate()
        rates = np.zeros(k_cap + 1)
        cutoff = None
        for k in range(2, k_cap + 1):
            rates[k] = self.total_rate(k)
            if cutoff is None and rates[k] >= H:
                cutoff = k
        if cutoff is None:
            raise CapExceeded(
                f"total rate at k={k_cap} is {rates[k_cap]:.6g} < dust rate {H:.6g}"
            )
        near_tie = abs(rates[cutoff] - H) < 1e-6 * H
        if near_tie:
            warnings.warn(
                f"near-tie at the cutoff: |rate({cutoff}) - dust rate| < 1e-6 * dust rate",
                stacklevel=2,
            )
        return RateTable(
            k_max=k_cap, rates=rates, dust_rate=H, cutoff=cutoff, near_tie=near_tie
        )

    # -- clipped integrals for the small-time constants ---------------------

    def clip_integral(self, x: float) -> float:
        """integral of min(a, x) a^-2 against the measure (in variable a)."""
        if not (0.0 <= x <= 1.0):
            raise OutOfRange(f"x must lie in [0,1], got {x}")
        if not self.has_dust:
            raise DivergentIntegral("dust condition fails")
        if x == 0.0:
            return 0.0
        v = sum(w * min(r, x) / (r * r) for r, w in self.atoms)
        for bp in self.beta_parts:
            v += bp.quad(-1.0, 0.0, 0.0, x)
            if x < 1.0:
                v += x * bp.quad(-2.0, 0.0, x, 1.0)
        return v

    def tilted_clip_integral(self, x: float) -> float:
        """integral of min((1-x) a, x) (1-a) a^-2 against the measure."""
        if not (0.0 <= x <= 1.0):
            raise OutOfRange(f"x must lie in [0,1], got {x}")
        if not self.has_dust:
            raise DivergentIntegral("dust condition fails")
        if x == 0.0 or x == 1.0:
            return 0.0
        v = sum(w * min((1.0 - x) * r, x) * (1.0 - r) / (r * r) for r, w in self.atoms)
        knee = x / (1.0 - x)  # where (1-x) a crosses x
        for bp in self.beta_parts:
            if knee >= 1.0:
                v += (1.0 - x) * bp.quad(-1.0, 1.0, 0.0, 1.0)
            else:
                v += (1.0 - x) * bp.quad(-1.0, 1.0, 0.0, knee)
                v += x * bp.quad(-2.0, 1.0, knee, 1.0)
        return v

    def curvature_constant(self) -> float:
        """integral of tilted_clip_integral(r) r^-2 against the measure.

        Governs the quadratic early growth of the second-largest mass.
        """
        if "curvature" in self._cache:
            return self._cache["curvature"]
        if not self.h_integrable:
            raise DivergentIntegral(
                "the nested clip integral diverges for this measure"
            )
        v = sum(w * self.tilted_clip_integral(r) / (r * r) for r, w in self.atoms)
        for bp in self.beta_parts:

            def f(r, bp=bp):
                return self.tilted_clip_integral(r) * bp.coef * r ** (bp.a - 3.0) * (
                    1.0 - r
                ) ** (bp.b - 1.0)

            val, _ = integrate.quad(f, EPSQ, 1.0, epsabs=1e-12, epsrel=1e-9, limit=200)
            if bp.a < 2.0:
                # leading behavior of the inner integral near 0 is ch * r^(a-1)
                ch = 1.0 / (bp.a - 1.0) + 1.0 / (2.0 - bp.a)
                val += ch * bp.coef * EPSQ ** (2.0 * bp.a - 3.0) / (2.0 * bp.a - 3.0)
            v += val
        self._cache["curvature"] = v
        return v

    # -- truncation functionals ---------------------------------------------

    def jump_rate_above(self, delta: float) -> float:
        """Total activity of jumps with r > delta: integral of r^-2 over (delta, 1)."""
        if not (0.0 < delta < 1.0):
            raise OutOfRange(f"delta must lie in (0,1), got {delta}")
        v = sum(w / (r * r) for r, w in self.atoms if r > delta)
        for bp in self.beta_parts:
            v += bp.quad(-2.0, 0.0, delta, 1.0)
        return v

    def omitted_mass_rate(self, delta: float) -> float:
        """Mass-per-unit-time bound for jumps dropped below delta:
        integral of (1-r)^-1 r^-1 over (0, delta]."""
        if not (0.0 < delta < 1.0):
            raise OutOfRange(f"delta must lie in (0,1), got {delta}")
        if not self.has_dust:
            raise DivergentIntegral("dust condition fails")
        v = sum(w / (r * (1.0 - r)) for r, w in self.atoms if r <= delta)
        for bp in self.beta_parts:
            v += bp.quad(-1.0, -1.0, 0.0, delta)
        return v


@dataclass
class RateTable:
    """Total merge rates per block count, with the crossing index against the
    dust decay rate."""

    k_max: int
    rates: np.ndarray  # rates[k] for k = 0..k_max; rates[0] unused, rates[1] = 0
    dust_rate: float
    cutoff: int
    near_tie: bool = False

    def rate(self, k: int) -> float:
        if not (1 <= k <= self.k_max):
            raise OutOfRange(f"k must lie in [1, {self.k_max}], got {k}")
        return float(self.rates[k])


def validate(spec, analysis_only: bool = False) -> LambdaMeasure:
    """Parse and check a measure spec; reject measures the engine cannot run
    (unless analysis_only retains them for closed-form work)."""
    return LambdaMeasure.from_spec(spec, analysis_only=analysis_only)


def beta_measure(a: float, b: float, analysis_only: bool = False) -> LambdaMeasure:
    return validate({"kind": "beta", "a": a, "b": b}, analysis_only=analysis_only)


def atomic_measure(atoms) -> LambdaMeasure:
    return validate({"kind": "atomic", "atoms": [list(x) for x in atoms]})
