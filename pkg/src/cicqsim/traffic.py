"""Traffic matrices and Bernoulli arrivals."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .core import Cell, Rng

SCHEDULABLE_TOL = 1e-9


class ScenarioVariant(enum.Enum):
    """How port 2 is loaded in the two-port asymmetric scenario.

    REGION mirrors port 1's cross traffic (rate(2,1) = rate(1,2)).
    SATURATED_PORT2 adds the slack of port 1 on top, which loads output 1 to
    exactly one cell per slot.
    """

    REGION = "region"
    SATURATED_PORT2 = "saturated"


@dataclass(frozen=True)
class TrafficMatrix:
    rate: tuple

    def __post_init__(self):
        n = len(self.rate)
        for row in self.rate:
            if len(row) != n:
                raise ValueError("traffic matrix must be square")
            for r in row:
                if not (0.0 <= r <= 1.0):
                    raise ValueError(f"rate {r} outside [0, 1]")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "TrafficMatrix":
        return cls(tuple(tuple(float(x) for x in row) for row in rows))

    @classmethod
    def zeros(cls, n: int) -> "TrafficMatrix":
        return cls.from_rows([[0.0] * n for _ in range(n)])

    @classmethod
    def uniform(cls, n: int, load: float = 1.0) -> "TrafficMatrix":
        return cls.from_rows([[load / n] * n for _ in range(n)])

    @property
    def n(self) -> int:
        return len(self.rate)

    def as_array(self) -> np.ndarray:
        return np.array(self.rate, dtype=np.float64)

    def row_sums(self) -> List[float]:
        return [sum(row) for row in self.rate]

    def col_sums(self) -> List[float]:
        return [sum(row[j] for row in self.rate) for j in range(self.n)]


def two_port_matrix(n_ports: int, l11: float, l12: float, l21: float) -> TrafficMatrix:
    """N-port matrix with only the (1,1), (1,2) and (2,1) pairs active."""
    if n_ports < 2:
        raise ValueError("two-port scenarios need n_ports >= 2")
    rows = [[0.0] * n_ports for _ in range(n_ports)]
    rows[0][0] = l11
    rows[0][1] = l12
    rows[1][0] = l21
    return TrafficMatrix.from_rows(rows)


def build_unstable_scenario(
    n_ports: int, lambda1: float, f: float, variant: ScenarioVariant
) -> TrafficMatrix:
    """Asymmetric load on ports 1 and 2: port 1 sends ``f * lambda1`` to
    output 1 and the remainder to output 2; port 2 sends only to output 1.
    """
    if not (0.5 <= f < 1.0):
        raise ValueError(f"f={f} outside [1/2, 1)")
    if not (0.0 < lambda1 <= 1.0):
        raise ValueError(f"lambda1={lambda1} outside (0, 1]")
    l11 = f * lambda1
    l12 = lambda1 - l11
    if variant is ScenarioVariant.REGION:
        l21 = l12
    else:
        l21 = l12 + (1.0 - lambda1)
    return two_port_matrix(n_ports, l11, l12, l21)


def generate_arrivals(matrix: TrafficMatrix, slot: int, rng: Rng) -> List[Cell]:
    """One Bernoulli trial per positive-rate pair, input-major order."""
    cells = []
    for i, row in enumerate(matrix.rate):
        for j, r in enumerate(row):
            if r <= 0.0:
                continue
            if rng.next_uniform() < r:
                cells.append(Cell(i, j, slot))
    return cells


def check_schedulable(matrix: TrafficMatrix) -> bool:
    limit = 1.0 + SCHEDULABLE_TOL
    return all(s <= limit for s in matrix.row_sums()) and all(
        s <= limit for s in matrix.col_sums()
    )
