"""Variable exponent fields p(x) and their admissibility diagnostics.

Admissibility means 1 < p_minus <= p(x) <= p_plus < infinity at every sample,
plus a finite logarithmic modulus of continuity
sup |p(x)-p(y)| * ln(1/|x-y|) over pairs with |x-y| < 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Grid

LOG_HOLDER_SEED = 0x5EED
LOG_HOLDER_DEFAULT_CAP = 10.0


@dataclass
class ExponentField:
    """p(x) of one of four kinds.

    kind="constant":   p = value
    kind="affine":     p = base + sum_a slopes[a] * x_a
    kind="sinusoidal": p = base + amplitude * sin(pi * frequency * x_0 / L_0)
    kind="sampled":    cell-centered samples (x fastest when given flat)

    Extrema over the grid samples are cached by :func:`extrema`.
    """

    kind: str
    value: float = 0.0
    base: float = 0.0
    slopes: tuple[float, ...] = ()
    amplitude: float = 0.0
    frequency: float = 1.0
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    p_minus: Optional[float] = None
    p_plus: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "affine", "sinusoidal", "sampled"):
            raise ValueError(f"unknown exponent kind {self.kind!r}")
        if self.samples is not None:
            self.samples = np.asarray(self.samples, dtype=np.float64)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "ExponentField":
        return cls(kind="constant", value=float(value))

    @classmethod
    def affine(cls, base: float, slopes) -> "ExponentField":
        return cls(kind="affine", base=float(base), slopes=tuple(float(s) for s in slopes))

    @classmethod
    def sinusoidal(cls, base: float, amplitude: float, frequency: float = 1.0) -> "ExponentField":
        return cls(kind="sinusoidal", base=float(base), amplitude=float(amplitude),
                   frequency=float(frequency))

    @classmethod
    def sampled(cls, samples) -> "ExponentField":
        return cls(kind="sampled", samples=np.asarray(samples, dtype=np.float64))

    # -- evaluation --------------------------------------------------------

    def evaluate(self, coords: list[np.ndarray], grid: Grid) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(coords[0], self.value)
        if self.kind == "affine":
            if len(self.slopes) != len(coords):
                raise ValueError("affine exponent slope count does not match dimension")
            out = np.full_like(coords[0], self.base)
            for s, x in zip(self.slopes, coords):
                out = out + s * x
            return out
        if self.kind == "sinusoidal":
            L0 = grid.extent[0]
            return self.base + self.amplitude * np.sin(np.pi * self.frequency * coords[0] / L0)
        raise ValueError("sampled exponent fields cannot be evaluated off the grid")

    def cell_values(self, grid: Grid) -> np.ndarray:
        if self.kind == "sampled":
            vals = self.samples
            if vals.shape != grid.cells:
                if vals.size == grid.n_cells:
                    vals = vals.reshape(grid.cells, order="F")
                else:
                    raise ValueError("sampled exponent count does not match the grid")
            return np.ascontiguousarray(vals)
        return np.ascontiguousarray(self.evaluate(grid.meshgrid(), grid))

    def face_values(self, grid: Grid, axis: int) -> np.ndarray:
        """p at the faces normal to ``axis`` by arithmetic averaging of the two
        adjacent cell values; a boundary face takes its single neighbor's value."""
        pc = self.cell_values(grid)
        pc_move = np.moveaxis(pc, axis, 0)
        n = pc_move.shape[0]
        out = np.empty((n + 1,) + pc_move.shape[1:])
        out[1:n] = 0.5 * (pc_move[:-1] + pc_move[1:])
        out[0] = pc_move[0]
        out[n] = pc_move[-1]
        return np.ascontiguousarray(np.moveaxis(out, 0, axis))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "affine":
            return {"kind": "affine", "base": self.base, "slopes": list(self.slopes)}
        if self.kind == "sinusoidal":
            return {"kind": "sinusoidal", "base": self.base, "amplitude": self.amplitude,
                    "frequency": self.frequency}
        return {"kind": "sampled", "values": self.samples.flatten(order="F").tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "ExponentField":
        kind = obj["kind"]
        if kind == "constant":
            return cls.constant(obj["value"])
        if kind == "affine":
            return cls.affine(obj["base"], obj["slopes"])
        if kind == "sinusoidal":
            return cls.sinusoidal(obj["base"], obj["amplitude"], obj.get("frequency", 1.0))
        if kind == "sampled":
            return cls.sampled(obj["values"])
        raise ValueError(f"unknown exponent kind {kind!r}")


@dataclass
class LogHolderReport:
    sup_modulus: float
    satisfied: bool
    pairs_sampled: int
    cap: float


def extrema(p: ExponentField, grid: Grid) -> tuple[float, float]:
    """Extrema of p over cell centers and face sample points; cached on ``p``.

    Face samples are the averaged values used by the operators, so they never
    leave the hull of the cell samples.  Rejects p_minus <= 1.
    """
    if grid.n_cells == 0:
        raise ValueError("grid is empty")
    vals = [p.cell_values(grid)]
    for axis in range(grid.dim):
        vals.append(p.face_values(grid, axis))
    p_minus = float(min(np.min(v) for v in vals))
    p_plus = float(max(np.max(v) for v in vals))
    if not np.isfinite(p_minus) or not np.isfinite(p_plus):
        raise ValueError("exponent field has non-finite samples")
    if p_minus <= 1.0:
        raise ValueError(f"exponent minimum {p_minus} violates p(x) > 1")
    p.p_minus, p.p_plus = p_minus, p_plus
    return p_minus, p_plus


def bounds(p: ExponentField, grid: Grid) -> tuple[float, float]:
    """Cached (p_minus, p_plus), computing them on first use."""
    if p.p_minus is None or p.p_plus is None:
        return extrema(p, grid)
    return p.p_minus, p.p_plus


def log_holder_estimate(p: ExponentField, grid: Grid,
                        cap: float = LOG_HOLDER_DEFAULT_CAP,
                        max_pairs: int = 200_000,
                        seed: int = LOG_HOLDER_SEED) -> LogHolderReport:
    """sup over sampled pairs x != y, |x-y| < 1, of |p(x)-p(y)| * ln(1/|x-y|).

    Exhaustive over cell-center pairs in 1D below 512 cells; otherwise a fixed
    number of seeded random pairs (exhaustive enumeration is quadratic).
    """
    if grid.n_cells < 2:
        raise ValueError("need at least 2 cells")
    pc = p.cell_values(grid)
    coords = grid.meshgrid()

    if grid.dim == 1 and grid.cells[0] < 512:
        x = coords[0]
        pv = pc
        dx = np.abs(x[:, None] - x[None, :])
        dp = np.abs(pv[:, None] - pv[None, :])
        mask = (dx > 0.0) & (dx < 1.0)
        sup = 0.0
        if np.any(mask):
            sup = float(np.max(dp[mask] * np.log(1.0 / dx[mask])))
        n_pairs = int(np.count_nonzero(mask)) // 2
    else:
        rng = np.random.default_rng(seed)
        flatc = [c.ravel() for c in coords]
        flatp = pc.ravel()
        n = flatp.size
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n, size=max_pairs)
        d2 = np.zeros(max_pairs)
        for c in flatc:
            d2 += (c[i] - c[j]) ** 2
        d = np.sqrt(d2)
        dp = np.abs(flatp[i] - flatp[j])
        mask = (d > 0.0) & (d < 1.0)
        sup = 0.0
        if np.any(mask):
            sup = float(np.max(dp[mask] * np.log(1.0 / d[mask])))
        n_pairs = int(np.count_nonzero(mask))

    satisfied = bool(np.isfinite(sup) and sup <= cap)
    return LogHolderReport(sup_modulus=sup, satisfied=satisfied,
                           pairs_sampled=n_pairs, cap=cap)
