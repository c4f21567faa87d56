"""Discrete gradient, p(x)-Laplacian and reaction source on cell-centered grids.

Boundary convention (half-cell Dirichlet): the wall value is exactly 0, which
is the same as a mirror ghost cell u_ghost = -u_edge.  The gradient at a
boundary face is therefore (u_edge - (-u_edge))/h = u_edge/(h/2).

The flux through a face normal to axis a is

    F = D * g_a,   D = (|grad u|^2 + eps_reg^2)^((p_face - 2)/2),

with g_a the normal difference quotient and |grad u| the full gradient
magnitude at the face.  Tangential components at a face are reconstructed by
averaging the neighboring cell-centered differences (four in 2D, eight in 3D).
p at a face is the arithmetic mean of the two adjacent cell exponents.

With p = 2 and eps_reg = 0 the divergence of these fluxes is exactly the
classical 3/5/7-point Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentField
from .grid import Grid, ScalarField


# ---------------------------------------------------------------------------
# face-based linear maps and their transposes
# ---------------------------------------------------------------------------

def normal_gradient(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Difference quotient at the faces normal to ``axis`` (mirror ghosts)."""
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    g = np.empty((n + 1,) + v.shape[1:])
    g[1:n] = (v[1:] - v[:-1]) / h
    g[0] = 2.0 * v[0] / h
    g[n] = -2.0 * v[-1] / h
    return np.moveaxis(g, 0, axis)


def normal_gradient_t(cot: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Transpose of :func:`normal_gradient` (faces -> cells)."""
    c = np.moveaxis(cot, axis, 0)
    out = (c[:-1] - c[1:]) / h
    out[0] += c[0] / h
    out[-1] -= c[-1] / h
    return np.moveaxis(out, 0, axis)


def faces_to_cells(face_vals: np.ndarray, axis: int) -> np.ndarray:
    """Average the two faces of each cell along ``axis``."""
    v = np.moveaxis(face_vals, axis, 0)
    out = 0.5 * (v[:-1] + v[1:])
    return np.moveaxis(out, 0, axis)


def faces_to_cells_t(cot: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(cot, axis, 0)
    n = c.shape[0]
    out = np.zeros((n + 1,) + c.shape[1:])
    out[:-1] += 0.5 * c
    out[1:] += 0.5 * c
    return np.moveaxis(out, 0, axis)


def cells_to_faces(cell_vals: np.ndarray, axis: int) -> np.ndarray:
    """Average adjacent cells onto the faces normal to ``axis``; boundary faces
    copy their single neighbor."""
    v = np.moveaxis(cell_vals, axis, 0)
    n = v.shape[0]
    out = np.empty((n + 1,) + v.shape[1:])
    out[1:n] = 0.5 * (v[:-1] + v[1:])
    out[0] = v[0]
    out[n] = v[-1]
    return np.moveaxis(out, 0, axis)


def cells_to_faces_t(cot: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(cot, axis, 0)
    out = 0.5 * (c[:-1] + c[1:])
    out[0] += 0.5 * c[0]
    out[-1] += 0.5 * c[-1]
    return np.moveaxis(out, 0, axis)


def face_weights(grid: Grid, axis: int) -> np.ndarray:
    """Quadrature weights for the faces normal to ``axis``: h^N per face,
    halved on the two boundary layers (trapezoid along the normal direction).

    In 1D these weights make sum_f w_f phi'(g_f) g_f(v) the exact transpose of
    the flux divergence, which is what keeps the discrete energy identity
    E' = -||u_t||^2 clean to first order in dt.
    """
    shape = tuple(n + 1 if a == axis else n for a, n in enumerate(grid.cells))
    w = np.full(shape, grid.cell_volume)
    sl0 = [slice(None)] * grid.dim
    sl1 = [slice(None)] * grid.dim
    sl0[axis] = 0
    sl1[axis] = -1
    w[tuple(sl0)] *= 0.5
    w[tuple(sl1)] *= 0.5
    return w


# ---------------------------------------------------------------------------
# gradient magnitude at faces
# ---------------------------------------------------------------------------

@dataclass
class FaceVectorField:
    """Face-normal gradient components, one array per axis.

    ``normal[a]`` has one more entry than the grid along axis ``a``.
    ``magnitude_sq[a]`` is |grad u|^2 at the a-faces including the
    reconstructed tangential components.
    """

    grid: Grid
    normal: list[np.ndarray] = field(repr=False)
    magnitude_sq: list[np.ndarray] = field(repr=False)


def gradient_faces(u: ScalarField) -> FaceVectorField:
    grid = u.grid
    h = grid.spacing
    normals = [normal_gradient(u.values, a, h[a]) for a in range(grid.dim)]
    mags = []
    for a in range(grid.dim):
        S = normals[a] ** 2
        for b in range(grid.dim):
            if b == a:
                continue
            t = cells_to_faces(faces_to_cells(normals[b], b), a)
            S = S + t**2
        mags.append(S)
    return FaceVectorField(grid=grid, normal=normals, magnitude_sq=mags)


def face_magnitude_sq_vjp(u: ScalarField, cotangents: list[np.ndarray]) -> np.ndarray:
    """Cell-space gradient of sum_a <cotangents[a], magnitude_sq[a]>.

    Exact transpose chain of :func:`gradient_faces`; used by the eigen solver
    and the embedding-constant ascent.
    """
    grid = u.grid
    h = grid.spacing
    normals = [normal_gradient(u.values, a, h[a]) for a in range(grid.dim)]
    cot_g = [np.zeros_like(g) for g in normals]
    for a in range(grid.dim):
        W = cotangents[a]
        cot_g[a] += 2.0 * normals[a] * W
        for b in range(grid.dim):
            if b == a:
                continue
            t = cells_to_faces(faces_to_cells(normals[b], b), a)
            cot_t = 2.0 * t * W
            cot_g[b] += faces_to_cells_t(cells_to_faces_t(cot_t, a), b)
    out = np.zeros(grid.cells)
    for a in range(grid.dim):
        out += normal_gradient_t(cot_g[a], a, h[a])
    return out


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def px_laplacian(u: ScalarField, p: ExponentField, eps_reg: float = 0.0) -> ScalarField:
    """div(|grad u|^(p(x)-2) grad u) with regularized diffusivity.

    eps_reg > 0 caps the singular diffusivity where p < 2 and grad u -> 0
    (and removes the degenerate zero where p > 2); its value is a config knob
    that must be echoed in outputs.
    """
    if eps_reg < 0:
        raise ValueError("eps_reg must be >= 0")
    grid = u.grid
    h = grid.spacing
    faces = gradient_faces(u)
    out = np.zeros(grid.cells)
    eps2 = eps_reg * eps_reg
    for a in range(grid.dim):
        pf = p.face_values(grid, a)
        D = np.power(faces.magnitude_sq[a] + eps2, 0.5 * (pf - 2.0))
        F = D * faces.normal[a]
        Fm = np.moveaxis(F, a, 0)
        div = (Fm[1:] - Fm[:-1]) / h[a]
        out += np.moveaxis(div, 0, a)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("p(x)-Laplacian produced non-finite values (unstable state?)")
    return ScalarField(grid, out)


def source_term(u: ScalarField, r: float) -> ScalarField:
    """|u|^(r-2) u, extended by 0 at u = 0 (continuity, since r > 1)."""
    if r <= 1:
        raise ValueError("source exponent r must be > 1")
    vals = u.values
    out = np.sign(vals) * np.power(np.abs(vals), r - 1.0)
    return ScalarField(u.grid, out)
