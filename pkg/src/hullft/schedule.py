"""
Training schedules with gradient-refresh flags.

Every maximal run of identical consecutive example ids is one block; step
``t`` of a block refreshes the gradient iff ``t % r == 0`` and reuses the
cached gradient otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import groupby
from typing import Optional, Sequence

from .errors import ContractError
from .integerize import SupportMultiset


class Action(str, Enum):
    REFRESH = "refresh"
    REUSE = "reuse"


BLOCK_ORDERS = ("count_descending", "support_order")


@dataclass(frozen=True)
class ScheduleStats:
    total_steps: int
    fb_passes: int
    reuse_steps: int
    theoretical_speedup: float


@dataclass(frozen=True)
class GroupedSequence:
    blocks: tuple  # ((example_id, run_length), ...)

    def __post_init__(self):
        blocks = tuple((b[0], int(b[1])) for b in self.blocks)
        if any(n < 1 for _, n in blocks):
            raise ContractError("run lengths must be >= 1")
        object.__setattr__(self, "blocks", blocks)

    def expand(self) -> list:
        return [ex for ex, n in self.blocks for _ in range(n)]

    def __len__(self):
        return sum(n for _, n in self.blocks)


def _check_interval(r):
    if int(r) != r or r < 1:
        raise ContractError(f"refresh interval must be a positive integer, got {r!r}")
    return int(r)


def _runs(ids):
    return [(k, sum(1 for _ in g)) for k, g in groupby(ids)]


@dataclass(frozen=True)
class TrainingSchedule:
    steps: tuple  # ((example_id, Action), ...)
    refresh_interval: int

    def __post_init__(self):
        r = _check_interval(self.refresh_interval)
        steps = tuple((ex, Action(a)) for ex, a in self.steps)
        t = 0
        for i, (ex, action) in enumerate(steps):
            t = t + 1 if i and steps[i - 1][0] == ex else 0
            expected = Action.REFRESH if t % r == 0 else Action.REUSE
            if action is not expected:
                raise ContractError(f"step {i} ({ex!r}, run position {t}) should be {expected.value}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "refresh_interval", r)

    @property
    def example_ids(self) -> list:
        return [ex for ex, _ in self.steps]

    def blocks(self) -> GroupedSequence:
        return GroupedSequence(_runs(self.example_ids))

    def stats(self) -> ScheduleStats:
        n = len(self.steps)
        fb = sum(1 for _, a in self.steps if a is Action.REFRESH)
        return ScheduleStats(n, fb, n - fb, n / fb if fb else 1.0)

    def __len__(self):
        return len(self.steps)


def _block_steps(example_id, length, r):
    return [(example_id, Action.REFRESH if t % r == 0 else Action.REUSE) for t in range(length)]


def schedule_from_groups(g: GroupedSequence, r: int) -> TrainingSchedule:
    """Apply the refresh rule to each block of ``g`` in order.

    Adjacent blocks with the same id are trained as one run, so they are
    merged before the rule is applied.
    """
    r = _check_interval(r)
    steps = []
    for ex, n in _runs(g.expand()):
        steps.extend(_block_steps(ex, n, r))
    return TrainingSchedule(tuple(steps), r)


def build_reuse_schedule(
    ms: SupportMultiset,
    r: int,
    block_order: str = "count_descending",
    ids: Optional[Sequence] = None,
) -> TrainingSchedule:
    """One contiguous block per support point with a positive count.

    ``ids`` maps pool indices to example ids (e.g. ``pool.ids``); without it
    the pool indices themselves are used. ``count_descending`` orders blocks
    by count, ties by support position.
    """
    r = _check_interval(r)
    pairs = ms.nonzero()
    if block_order == "count_descending":
        pairs = sorted(pairs, key=lambda p: -p[1])
    elif block_order != "support_order":
        raise ContractError(f"block_order must be one of {BLOCK_ORDERS}")
    blocks = [(ids[i] if ids is not None else i, c) for i, c in pairs]
    steps = []
    for ex, c in blocks:
        steps.extend(_block_steps(ex, c, r))
    return TrainingSchedule(tuple(steps), r)


def global_dedup(seq) -> GroupedSequence:
    """One block per distinct id with its total count, in first-occurrence order."""
    counts = {}
    for ex in seq:
        counts[ex] = counts.get(ex, 0) + 1
    return GroupedSequence(tuple(counts.items()))


def consecutive_group(seq) -> GroupedSequence:
    """Run-length encoding of ``seq``."""
    return GroupedSequence(tuple(_runs(seq)))

