"""Ground-truth brute-force range search and a deterministic workload generator.

The generator runs on splitmix64 so identical configs produce bit-identical
point sets on any platform.  brute_force_query is the independent oracle every
structural claim is tested against; it never touches the tree code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, Point, PointSet, QueryBox

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO64 = float(2**64)


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state by one step; returns (new_state, output).

    All arithmetic wraps mod 2^64.
    """
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """Stateful convenience wrapper around splitmix64_next."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64_next(self.state)
        return out

    def next_float(self) -> float:
        """Uniform in [0, 1): output / 2^64."""
        return self.next_u64() / _TWO64

    def next_below(self, bound: int) -> int:
        """Output mod bound (bound >= 1); biased but fine for test workloads."""
        return self.next_u64() % bound


@dataclass(frozen=True)
class GeneratorConfig:
    """Deterministic workload description.

    dist "uniform" draws each coordinate in [0, 1); dist "grid" draws integers
    in [0, grid_side) (duplicates likely, which is the point).
    """

    seed: int
    n: int
    dims: int
    dist: str = "uniform"
    grid_side: int = 16

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.dist not in ("uniform", "grid"):
            raise ValueError(f"unknown distribution {self.dist!r}")
        if self.dist == "grid" and self.grid_side < 1:
            raise ValueError("grid side must be >= 1")


def gen_points(cfg: GeneratorConfig) -> PointSet:
    """Draw cfg.n points coordinate-by-coordinate from one splitmix64 stream.

    Ids are 0..n-1 in generation order.  Bit-reproducible for a given cfg.
    """
    rng = SplitMix64(cfg.seed)
    pts = []
    if cfg.dist == "uniform":
        for i in range(cfg.n):
            pts.append(Point(tuple(rng.next_float() for _ in range(cfg.dims)), i))
    else:
        g = cfg.grid_side
        for i in range(cfg.n):
            pts.append(Point(tuple(float(rng.next_below(g)) for _ in range(cfg.dims)), i))
    return PointSet(pts, cfg.dims)


def brute_force_query(points: PointSet, box: QueryBox) -> list[Point]:
    """Linear filter of the point set by box containment, sorted by id.

    Vectorized over the cached coordinate matrix; the result is identical to
    filtering with box_contains point by point.
    """
    if box.dims != points.dims:
        raise DimensionMismatch(
            f"box of dimension {box.dims}, point set of dimension {points.dims}"
        )
    if len(points) == 0:
        return []
    m = points.coord_matrix()
    lo = np.asarray(box.lo, dtype=np.float64)
    hi = np.asarray(box.hi, dtype=np.float64)
    mask = np.all((m >= lo) & (m <= hi), axis=1)
    by_id = points.by_id
    return [by_id[i] for i in np.nonzero(mask)[0]]
