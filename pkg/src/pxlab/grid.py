"""Rectangular cell-centered grids and scalar fields with homogeneous Dirichlet walls.

The unknowns live at cell centers of a box in 1, 2 or 3 dimensions.  The wall
value is identically zero; it is enforced through a mirror ghost value, so the
gradient at a boundary face is (u_edge - 0)/(h/2).  Fields are stored as
float64 arrays of shape ``grid.cells``; axis 0 is x.  Flattened exports use
Fortran order, i.e. the x index varies fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    cells: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        extent = tuple(float(L) for L in self.extent)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)
        if not 1 <= len(cells) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(cells)}")
        if len(extent) != len(cells):
            raise ValueError("cells and extent must have the same length")
        if any(n < 3 for n in cells):
            raise ValueError("need at least 3 cells per axis")
        if any(L <= 0 for L in extent):
            raise ValueError("extents must be positive")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays, each of shape ``self.cells``."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def to_json(self) -> dict:
        return {"dim": self.dim, "cells": list(self.cells), "extent": list(self.extent)}

    @classmethod
    def from_json(cls, obj: dict) -> "Grid":
        grid = cls(tuple(obj["cells"]), tuple(obj["extent"]))
        if "dim" in obj and int(obj["dim"]) != grid.dim:
            raise ValueError("declared dim does not match cells")
        return grid


@dataclass
class ScalarField:
    """Cell-centered samples of u (or Phi, w, v) with implicit zero walls."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.cells:
            if vals.size == self.grid.n_cells:
                vals = vals.reshape(self.grid.cells, order="F")
            else:
                raise ValueError(
                    f"field has {vals.size} samples, grid has {self.grid.n_cells} cells"
                )
        self.values = np.ascontiguousarray(vals)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def flat(self) -> np.ndarray:
        """Flattened values, x fastest."""
        return self.values.flatten(order="F")

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))


def zero_field(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.cells))


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample ``fn(*coords)`` at cell centers."""
    return ScalarField(grid, fn(*grid.meshgrid()))


def write_field_csv(path, u: ScalarField) -> None:
    """Dump a field as one value per line, x index fastest."""
    flat = u.flat()
    with open(path, "w") as f:
        f.write("value\n")
        for v in flat:
            f.write(f"{v!r}\n")
