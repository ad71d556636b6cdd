"""Switch configuration, per-slot state and the shared random source."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SchedulerKind(enum.Enum):
    RR_RR_CICQ = "rr_rr"
    OCF_RR = "ocf_rr"
    LQF_RR = "lqf_rr"
    ISLIP = "islip"

    @classmethod
    def parse(cls, text: str) -> "SchedulerKind":
        key = text.strip().lower().replace("-", "_").replace("/", "_")
        for kind in cls:
            if key in (kind.value, kind.name.lower()):
                return kind
        raise ValueError(f"unknown scheduler {text!r}")


@dataclass(frozen=True)
class Cell:
    input_port: int
    output_port: int
    arrival_slot: int


@dataclass(frozen=True)
class BurstConfig:
    """Burst stabilization parameters.

    A VOQ longer than ``threshold`` may send up to ``burst`` consecutive cells
    before the input poll pointer moves on.  ``burst == 0`` is plain RR.
    """

    threshold: int = 32
    burst: int = 64

    def __post_init__(self):
        if self.threshold < 0 or self.burst < 0:
            raise ValueError("threshold and burst must be non-negative")


@dataclass(frozen=True)
class SwitchConfig:
    """Static switch parameters.

    ``credit_delay`` is the latency, in slots, before the input arbiter learns
    that a CP cell has left.  A cell leaving in slot t frees its buffer for
    the input side from slot t + credit_delay on; 0 means the input sees the
    departure in the same slot.
    """

    n_ports: int
    cp_capacity: int = 2
    scheduler: SchedulerKind = SchedulerKind.RR_RR_CICQ
    islip_iterations: int = 4
    burst: Optional[BurstConfig] = None
    voq_capacity: Optional[int] = None
    credit_delay: int = 1
    service_rate: float = 1.0

    def __post_init__(self):
        if self.n_ports < 1:
            raise ValueError("n_ports must be positive")
        if self.cp_capacity < 1:
            raise ValueError("cp_capacity must be positive")
        if self.islip_iterations < 1:
            raise ValueError("islip_iterations must be positive")
        if self.voq_capacity is not None and self.voq_capacity < 1:
            raise ValueError("voq_capacity must be positive when set")
        if self.credit_delay < 0:
            raise ValueError("credit_delay must be non-negative")
        if self.service_rate != 1.0:
            raise ValueError("only unit service rate (one cell per slot) is supported")

    @property
    def burst_size(self) -> int:
        return self.burst.burst if self.burst is not None else 0

    @property
    def threshold(self) -> int:
        return self.burst.threshold if self.burst is not None else 0


class Rng:
    """splitmix64 generator; one stream per run."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_uniform(self) -> float:
        """Uniform deviate in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def rng_next_uniform(rng: Rng) -> float:
    return rng.next_uniform()


@dataclass
class SwitchState:
    config: SwitchConfig
    voq: List[List[Deque[Cell]]]
    cp: List[List[Deque[Cell]]]
    input_rr_pointer: List[int]
    output_rr_pointer: List[int]
    burst_counter: List[List[int]]
    islip_grant_pointer: List[int]
    islip_accept_pointer: List[int]
    # departure slots per CP whose credit has not reached the input yet
    credit_pending: List[List[Deque[int]]] = field(default_factory=list)
    clock: int = 0

    @property
    def n(self) -> int:
        return self.config.n_ports

    def voq_len(self, i: int, j: int) -> int:
        return len(self.voq[i][j])

    def cp_seen(self, i: int, j: int) -> int:
        """CP occupancy as known to input port i (occupied + uncredited)."""
        return len(self.cp[i][j]) + len(self.credit_pending[i][j])

    def cp_blocked(self, i: int, j: int) -> bool:
        return self.cp_seen(i, j) >= self.config.cp_capacity

    def total_resident(self) -> int:
        n = self.n
        return sum(len(self.voq[i][j]) + len(self.cp[i][j]) for i in range(n) for j in range(n))

    def expire_credits(self) -> None:
        """Drop credits that have reached the input by the current clock."""
        horizon = self.clock - self.config.credit_delay
        for row in self.credit_pending:
            for pending in row:
                while pending and pending[0] <= horizon:
                    pending.popleft()


def new_switch_state(config: SwitchConfig) -> SwitchState:
    n = config.n_ports
    b = config.burst_size
    return SwitchState(
        config=config,
        voq=[[deque() for _ in range(n)] for _ in range(n)],
        cp=[[deque() for _ in range(n)] for _ in range(n)],
        input_rr_pointer=[0] * n,
        output_rr_pointer=[0] * n,
        burst_counter=[[b] * n for _ in range(n)],
        islip_grant_pointer=[0] * n,
        islip_accept_pointer=[0] * n,
        credit_pending=[[deque() for _ in range(n)] for _ in range(n)],
    )
