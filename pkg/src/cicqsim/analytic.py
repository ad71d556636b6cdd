"""Closed-form burst stability model.

All rates are in cells per cell time with unit service time, so the Erlang
utilization of a VOQ equals its arrival rate.  ``f`` is the fraction of port
1's load ``lambda1`` that goes to VOQ(1,1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class AnalyticDomainError(ValueError):
    pass


class ErlangClass(enum.Enum):
    BELOW_BOUNDARY = "BELOW_BOUNDARY"
    AT_OR_ABOVE_BOUNDARY = "AT_OR_ABOVE_BOUNDARY"


@dataclass(frozen=True)
class LoadPoint:
    f: float
    lambda1: float

    def __post_init__(self):
        if not (0.5 <= self.f < 1.0):
            raise AnalyticDomainError(f"f={self.f} outside [1/2, 1)")
        if not (0.0 < self.lambda1 <= 1.0):
            raise AnalyticDomainError(f"lambda1={self.lambda1} outside (0, 1]")

    @property
    def rho11(self) -> float:
        return self.f * self.lambda1

    @property
    def rho12(self) -> float:
        return self.lambda1 - self.rho11


@dataclass(frozen=True)
class BurstPrediction:
    b1: float
    b2: float
    b_hat: float
    b_min: int
    cs2: float


def vacating_burst_bound(lam: float, mu: float = 1.0) -> float:
    """Smallest burst that lets a one-slot-vacation server keep up with ``lam``."""
    if lam < 0:
        raise AnalyticDomainError("arrival rate must be non-negative")
    if lam >= mu:
        raise AnalyticDomainError(f"no finite burst: lam={lam} >= mu={mu}")
    return lam / (mu - lam)


def b2(f: float, lambda1: float) -> float:
    """Port-2 contribution: bursts of VOQ(1,1) between port-2 interruptions."""
    x = f * lambda1
    if x >= 1.0:
        raise AnalyticDomainError("f * lambda1 >= 1: saturated VOQ, arrivals are D/D/1")
    return x / (1.0 - x)


def b2_from_port2(lambda1: float, lambda12: float) -> float:
    """Same quantity from the port-2 interarrival time 1 / rate(2,1) - 1,
    with rate(2,1) = lambda12 + (1 - lambda1)."""
    return (lambda1 - lambda12) / (1.0 - lambda1 + lambda12)


def cs2(f: float) -> float:
    """Load-dependent squared coefficient of variation of the service time."""
    return 1.0 + 0.8 * (f - 0.5)


def b1(f: float, lambda1: float) -> float:
    """Port-1 contribution from the asymmetric share of the load."""
    if lambda1 >= 1.0:
        raise AnalyticDomainError("lambda1 = 1 is not covered: arrivals are D/D/1, not Poisson")
    return 0.4 * lambda1 * lambda1 / (1.0 - lambda1) * (f - 0.5)


def predict_min_burst(f: float, lambda1: float) -> BurstPrediction:
    LoadPoint(f, lambda1)
    lo = b1(f, lambda1)
    hi = b2(f, lambda1)
    b_hat = lo + hi
    return BurstPrediction(b1=lo, b2=hi, b_hat=b_hat, b_min=math.ceil(b_hat), cs2=cs2(f))


def mg1_polling_queue_length(lam: float, mu: float, cs2: float) -> float:
    """Mean queue length of the exhaustive M/G/1 polling model."""
    if lam >= mu:
        raise AnalyticDomainError(f"lam={lam} >= mu={mu}")
    return lam * lam / (mu - lam) * (cs2 - 1.0) / (2.0 * mu) + lam / (mu - lam)


def linear_boundary(rho12: float) -> float:
    return 1.0 - rho12


def boundary_rho11(rho12: float) -> float:
    """Parabolic edge of the unstable region, vertex at (1/2, 1/2)."""
    if not (0.0 <= rho12 <= 0.5):
        raise AnalyticDomainError(f"rho12={rho12} outside [0, 1/2]")
    return 1.0 - 2.0 * rho12 + 2.0 * rho12 * rho12


def classify_erlang_point(rho11: float, rho12: float) -> ErlangClass:
    for v in (rho11, rho12):
        if not (0.0 <= v <= 1.0):
            raise AnalyticDomainError(f"utilization {v} outside [0, 1]")
    if not (rho11 >= 0.5 >= rho12):
        raise AnalyticDomainError("expects rho11 >= 1/2 >= rho12")
    if rho11 >= boundary_rho11(rho12):
        return ErlangClass.AT_OR_ABOVE_BOUNDARY
    return ErlangClass.BELOW_BOUNDARY
