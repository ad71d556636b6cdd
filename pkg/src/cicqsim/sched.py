"""Arbiters: RR/RR CICQ with burst stabilization, OCF and LQF input
policies, and the iSLIP request-grant-accept matcher."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple

from .core import BurstConfig, SwitchState


class InputPolicy(enum.Enum):
    RR = "rr"
    OCF = "ocf"
    LQF = "lqf"


class BurstCounterEvent(enum.Enum):
    CELL_TRANSFERRED = "cell_transferred"
    VOQ_DRAINED = "voq_drained"
    POLL_POINTER_INCREMENTED = "poll_pointer_incremented"


@dataclass(frozen=True)
class Matching:
    pairs: FrozenSet[Tuple[int, int]]
    first_iteration: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def is_one_to_one(self) -> bool:
        ins = [i for i, _ in self.pairs]
        outs = [j for _, j in self.pairs]
        return len(set(ins)) == len(ins) and len(set(outs)) == len(outs)

    def output_for(self, i: int) -> Optional[int]:
        for a, b in self.pairs:
            if a == i:
                return b
        return None


def burst_update(counter: int, event: BurstCounterEvent, cfg: BurstConfig) -> int:
    if event is BurstCounterEvent.CELL_TRANSFERRED:
        return max(counter - 1, 0)
    return cfg.burst


def _eligible(state: SwitchState, i: int, j: int) -> bool:
    return state.voq_len(i, j) > 0 and not state.cp_blocked(i, j)


def _rr_arbitrate(state: SwitchState, i: int, burst: Optional[BurstConfig]) -> Optional[int]:
    n = state.n
    b = burst.burst if burst is not None else 0
    th = burst.threshold if burst is not None else 0
    counters = state.burst_counter[i]
    p = state.input_rr_pointer[i]

    if b > 0 and state.voq_len(i, p) > 0 and state.cp_blocked(i, p):
        counters[p] = b
        p = (p + 1) % n
        state.input_rr_pointer[i] = p

    sel = None
    for d in range(n):
        j = (p + d) % n
        if _eligible(state, i, j):
            sel = j
            break
    if sel is None:
        return None
    if sel != p:
        # pointer moves past p to reach sel
        counters[p] = b

    # bookkeeping for the transfer the caller is about to make
    remaining = state.voq_len(i, sel) - 1
    c = max(counters[sel] - 1, 0)
    if remaining == 0:
        counters[sel] = b
        state.input_rr_pointer[i] = (sel + 1) % n
    elif b > 0 and remaining > th and c > 0:
        counters[sel] = c
        state.input_rr_pointer[i] = sel
    else:
        counters[sel] = b
        state.input_rr_pointer[i] = (sel + 1) % n
    return sel


def cicq_input_arbitrate(
    state: SwitchState,
    port: int,
    policy: InputPolicy = InputPolicy.RR,
    burst: Optional[BurstConfig] = None,
) -> Optional[int]:
    """Pick the VOQ of ``port`` that transfers one cell to its CP this slot.

    Eligible VOQs are non-empty and not blocked by a full CP.  For RR the poll
    pointer and burst counters are updated as if the returned VOQ's head cell
    is transferred, which the caller must then do.  OCF and LQF keep no
    pointer state; ties go to the lowest VOQ index.
    """
    if policy is InputPolicy.RR:
        return _rr_arbitrate(state, port, burst)
    n = state.n
    best = None
    best_key = None
    for j in range(n):
        if not _eligible(state, port, j):
            continue
        if policy is InputPolicy.OCF:
            key = state.voq[port][j][0].arrival_slot
            better = best_key is None or key < best_key
        else:
            key = state.voq_len(port, j)
            better = best_key is None or key > best_key
        if better:
            best, best_key = j, key
    return best


def cicq_output_arbitrate(state: SwitchState, output: int) -> Optional[int]:
    n = state.n
    start = state.output_rr_pointer[output]
    for d in range(n):
        i = (start + d) % n
        if state.cp[i][output]:
            state.output_rr_pointer[output] = (i + 1) % n
            return i
    return None


def islip_match(
    requests: Sequence[Sequence[bool]],
    grant_ptr: List[int],
    accept_ptr: List[int],
    iterations: int,
) -> Matching:
    """Iterative request-grant-accept with rotating pointers.

    ``grant_ptr`` and ``accept_ptr`` are updated in place, and only for
    pairs matched in the first iteration.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n = len(requests)
    in_match = [-1] * n
    out_match = [-1] * n
    pairs = set()
    first = set()
    for it in range(iterations):
        grant = [-1] * n
        for j in range(n):
            if out_match[j] >= 0:
                continue
            for d in range(n):
                i = (grant_ptr[j] + d) % n
                if in_match[i] < 0 and requests[i][j]:
                    grant[j] = i
                    break
        for i in range(n):
            if in_match[i] >= 0:
                continue
            for d in range(n):
                j = (accept_ptr[i] + d) % n
                if grant[j] == i:
                    in_match[i] = j
                    out_match[j] = i
                    pairs.add((i, j))
                    if it == 0:
                        first.add((i, j))
                        grant_ptr[j] = (i + 1) % n
                        accept_ptr[i] = (j + 1) % n
                    break
    return Matching(frozenset(pairs), frozenset(first))
