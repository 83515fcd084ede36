"""Linearly edge-reinforced random walk on the half-line.

Edge {x, x+1} starts with weight w0(x) and gains ``delta`` per traversal. From
x >= 1 the walk steps right with probability w_n(x) / (w_n(x-1) + w_n(x));
from 0 it always steps right.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .exceptions import EnumerationLimitError, InvalidPathError
from .streams import stream
from .weights import WeightProfile

logger = logging.getLogger(__name__)

ENUMERATION_CAP = 22
_UNIFORM_BLOCK = 1 << 16

RandomSource = Union[np.random.Generator, int]


def as_generator(rng: RandomSource) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(int(rng))


@dataclass
class ReinforcedState:
    """Live walk state; single owner, mutated in place by ``step``."""

    position: int = 0
    edge_counts: Dict[int, int] = field(default_factory=dict)
    step: int = 0

    def edge_weight(self, profile: WeightProfile, edge: int) -> float:
        """Current weight of edge {edge, edge+1}; zero for the phantom edge -1."""
        if edge < 0:
            return 0.0
        return profile.weight(edge) + profile.delta * self.edge_counts.get(edge, 0)

    def right_probability(self, profile: WeightProfile) -> float:
        x = self.position
        if x == 0:
            return 1.0
        right = self.edge_weight(profile, x)
        return right / (self.edge_weight(profile, x - 1) + right)


def step(state: ReinforcedState, profile: WeightProfile, rng: RandomSource) -> ReinforcedState:
    """Advance the walk by one step and return the (same) state."""
    rng = as_generator(rng)
    u = rng.random()
    if state.position == 0 or u < state.right_probability(profile):
        edge = state.position
        state.position += 1
    else:
        edge = state.position - 1
        state.position -= 1
    state.edge_counts[edge] = state.edge_counts.get(edge, 0) + 1
    state.step += 1
    return state


# ---------------------------------------------------------------------------
# Exact path laws


def validate_path(path: Sequence[int]) -> List[int]:
    path = [int(v) for v in path]
    if not path or path[0] != 0:
        raise InvalidPathError("path must start at 0")
    for n, (a, b) in enumerate(zip(path, path[1:]), start=1):
        if b < 0:
            raise InvalidPathError(f"path leaves the half-line at step {n}")
        if abs(b - a) != 1:
            raise InvalidPathError(f"step {n} jumps from {a} to {b}")
    return path


def log_path_probability(profile: WeightProfile, path: Sequence[int]) -> float:
    """Log of the product of reinforced step probabilities along ``path``."""
    path = validate_path(path)
    counts: Dict[int, int] = {}
    weights: Dict[int, float] = {}
    delta = profile.delta

    def current(edge: int) -> float:
        if edge not in weights:
            weights[edge] = profile.weight(edge)
        return weights[edge] + delta * counts.get(edge, 0)

    log_p = 0.0
    for x, nxt in zip(path, path[1:]):
        if x > 0:
            right = current(x)
            chosen = right if nxt > x else current(x - 1)
            log_p += math.log(chosen) - math.log(current(x - 1) + right)
        edge = min(x, nxt)
        counts[edge] = counts.get(edge, 0) + 1
    return log_p


def path_probability(profile: WeightProfile, path: Sequence[int]) -> float:
    return math.exp(log_path_probability(profile, path))


def _enumerate(profile: WeightProfile, n: int, visit) -> None:
    """Depth-first walk over every admissible length-n path.

    ``visit(path, probability)`` is called once per complete path.
    """
    w0 = [profile.weight(x) for x in range(n + 1)]
    counts = [0] * (n + 1)
    delta = profile.delta
    path = [0]

    def descend(depth: int, prob: float) -> None:
        if depth == n:
            visit(path, prob)
            return
        x = path[-1]
        if x == 0:
            moves = ((1, 1.0),)
        else:
            right = w0[x] + delta * counts[x]
            left = w0[x - 1] + delta * counts[x - 1]
            total = left + right
            moves = ((1, right / total), (-1, left / total))
        for dx, p in moves:
            edge = x if dx > 0 else x - 1
            counts[edge] += 1
            path.append(x + dx)
            descend(depth + 1, prob * p)
            path.pop()
            counts[edge] -= 1

    descend(0, 1.0)


def enumerate_paths(profile: WeightProfile, n: int) -> Iterable[List[int]]:
    """All admissible length-n paths from 0, in lexicographic right-first order."""
    if n > ENUMERATION_CAP:
        raise EnumerationLimitError(f"path enumeration is capped at n={ENUMERATION_CAP}, got {n}")
    out: List[List[int]] = []
    _enumerate(profile, n, lambda path, _p: out.append(list(path)))
    return out


def distribution_of_position(profile: WeightProfile, n: int) -> Dict[int, float]:
    """Exact law of X_n by summing path probabilities grouped by endpoint."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n > ENUMERATION_CAP:
        raise EnumerationLimitError(f"path enumeration is capped at n={ENUMERATION_CAP}, got {n}")
    buckets: Dict[int, List[float]] = {}
    _enumerate(profile, n, lambda path, p: buckets.setdefault(path[-1], []).append(p))
    return {x: math.fsum(ps) for x, ps in sorted(buckets.items())}


# ---------------------------------------------------------------------------
# Simulation


class Checkpoint(BaseModel):
    n: int
    max_position: int
    position: int


class WalkStats(BaseModel):
    """Summary of one trajectory."""

    n_steps: int
    running_max: List[Checkpoint] = Field(default_factory=list, description="M_n at each checkpoint")
    first_hit: Dict[int, Optional[int]] = Field(
        default_factory=dict, description="tau_x per requested level; None when not hit"
    )
    returns_to_origin: int = 0
    final_position: int = 0
    max_position: int = 0


def geometric_checkpoints(n_steps: int) -> List[int]:
    """Powers of two up to ``n_steps``, plus ``n_steps`` itself."""
    points = []
    k = 1
    while k <= n_steps:
        points.append(k)
        k *= 2
    if n_steps >= 1 and points[-1] != n_steps:
        points.append(n_steps)
    return points


def simulate(
    profile: WeightProfile,
    n_steps: int,
    checkpoints: Optional[Sequence[int]] = None,
    hit_levels: Iterable[int] = (),
    rng: RandomSource = 0,
    state: Optional[ReinforcedState] = None,
) -> WalkStats:
    """Run ``n_steps`` reinforced steps; deterministic given the random source.

    The inner loop keeps weights and counts in dense lists indexed by edge and
    draws uniforms in blocks; a step from x >= 1 goes right when
    u * (left + right) < right, the same rule ``step`` applies.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps}")
    rng = as_generator(rng)
    state = state if state is not None else ReinforcedState()
    start = state.step
    end = start + n_steps
    # checkpoints count steps from the start of the walk, not of this call
    marks = sorted(set(int(c) for c in (checkpoints if checkpoints is not None else geometric_checkpoints(end))))
    marks = [c for c in marks if start < c <= end]
    levels = sorted(set(int(x) for x in hit_levels))
    first_hit: Dict[int, Optional[int]] = {x: None for x in levels}
    if state.step == 0 and 0 in first_hit:
        first_hit[0] = 0

    delta = profile.delta
    top = max(state.position, max(state.edge_counts, default=0)) + 2
    w0 = [profile.weight(x) for x in range(top)]
    counts = [0] * top
    for edge, c in state.edge_counts.items():
        counts[edge] = c

    x = state.position
    running_max = max(x, max(state.edge_counts, default=-1) + 1)
    pending_levels = [lv for lv in levels if lv > running_max]
    next_level = pending_levels.pop(0) if pending_levels else None
    returns = 0
    records: List[Checkpoint] = []
    mark_iter = iter(marks)
    next_mark = next(mark_iter, None)

    done = 0
    while done < n_steps:
        block = rng.random(min(_UNIFORM_BLOCK, n_steps - done)).tolist()
        for u in block:
            if x == 0:
                counts[0] += 1
                x = 1
            else:
                right = w0[x] + delta * counts[x]
                left = w0[x - 1] + delta * counts[x - 1]
                if u * (left + right) < right:
                    counts[x] += 1
                    x += 1
                else:
                    x -= 1
                    counts[x] += 1
                    if x == 0:
                        returns += 1
            done += 1
            if x > running_max:
                running_max = x
                if x + 1 >= len(w0):
                    w0.append(profile.weight(len(w0)))
                    counts.append(0)
                while next_level is not None and next_level <= running_max:
                    first_hit[next_level] = start + done
                    next_level = pending_levels.pop(0) if pending_levels else None
            if next_mark is not None and start + done == next_mark:
                records.append(Checkpoint(n=next_mark, max_position=running_max, position=x))
                next_mark = next(mark_iter, None)

    state.position = x
    state.step = start + n_steps
    state.edge_counts = {e: c for e, c in enumerate(counts) if c}
    return WalkStats(
        n_steps=state.step,
        running_max=records,
        first_hit=first_hit,
        returns_to_origin=returns,
        final_position=x,
        max_position=running_max,
    )


def simulate_with_state(
    profile: WeightProfile,
    n_steps: int,
    rng: RandomSource = 0,
    **kwargs,
) -> "tuple[WalkStats, ReinforcedState]":
    """``simulate`` from a fresh state, also returning the final state for continuation."""
    state = ReinforcedState()
    stats = simulate(profile, n_steps, rng=rng, state=state, **kwargs)
    return stats, state
