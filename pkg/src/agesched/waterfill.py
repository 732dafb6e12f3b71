"""Water-filling approximation of the optimal sampler and its threshold search."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import SolverError
from .solver import zero_wait_taa

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class WaterFillPolicy:
    """Wait ``[th - A_s / m]^+``, capped at ``max_wait`` (time units; None = uncapped)."""

    th: float
    m: int
    max_wait: float | None = None

    def __post_init__(self):
        if self.th < 0:
            raise ValueError("threshold must be non-negative")
        if self.m < 1:
            raise ValueError("need at least one source")

    def wait(self, sum_ages):
        return water_fill_wait(sum_ages, self)

    def _kernel_spec(self, m):
        from .sim import SamplerSpec

        return SamplerSpec.water_fill(self.th, self.max_wait)

    def as_config(self) -> dict:
        return {"th": self.th, "m": self.m, "M": self.max_wait}


def water_fill_wait(sum_ages, policy: WaterFillPolicy) -> float:
    z = max(0.0, policy.th - sum_ages / policy.m)
    if policy.max_wait is not None:
        z = min(z, policy.max_wait)
    return z


@dataclass
class GoldenSectionResult:
    th: float
    taa: float
    probes: list      # (th, taa) in evaluation order

    def __iter__(self):
        return iter((self.th, self.taa))


def golden_section_threshold(dist, m, evaluator, search_hi=None, tol=1e-3) -> GoldenSectionResult:
    """Golden-section search of ``evaluator(th)`` over ``[0, search_hi]``.

    Both endpoints are probed as well, and the best probe overall is returned,
    so a non-unimodal objective still yields the best point seen.
    """
    if search_hi is None:
        search_hi = zero_wait_taa(dist, m) / m
    if search_hi <= 0:
        raise ValueError("search interval must have positive length")
    probes = []

    def f(th):
        val = float(evaluator(th))
        if not math.isfinite(val):
            raise SolverError(f"evaluator returned {val} at th={th}")
        probes.append((th, val))
        return val

    a, b = 0.0, float(search_hi)
    f(a)
    f(b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    th, taa = min(probes, key=lambda t: (t[1], t[0]))
    return GoldenSectionResult(th, taa, probes)
