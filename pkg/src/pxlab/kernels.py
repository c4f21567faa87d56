"""Fused explicit-Euler integration kernels.

Each kernel advances the field in place for up to ``max_steps`` forward-Euler
steps or until it hits ``t_stop``, an event, or a dt underflow.  Per step:

  1. one stencil pass builds the regularized fluxes and the reaction source,
     records the largest face diffusivity D_max;
  2. dt = safety * min( 1/(2*D_max*sum_a 1/h_a^2), 1/(R_max + delta) ),
     clipped to land exactly on t_stop; R_max = (r-1)*linf^(r-2) is the
     reaction rate at the largest magnitude (evaluating |u|^(r-2) at the
     smallest nonzero |u| would diverge for r < 2 while the actual increment
     there vanishes);
  3. u += dt * rhs, |u| < flush_tol flushed to 0, norms and event thresholds
     checked, the dissipation integral sum dt*||u_t||_2^2 accumulated.

The stencil math matches operators.px_laplacian / source_term exactly (same
half-cell Dirichlet ghosts, same face-averaged exponents, same tangential
reconstruction); tests cross-validate the two paths.

Source modes: 0 = none, 1 = |u|^(r-2) u, 2 = lam1*v^r/(eps*Phi + lam1*v)
(the auxiliary comparison problem; v is clipped at 0 inside the source).

Return codes: 0 chunk done, 1 t_stop reached, 2 blow-up threshold, 3
extinction threshold, 4 non-finite state, 5 dt underflow.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

DT_DELTA = 1e-30

CODE_CHUNK = 0
CODE_TSTOP = 1
CODE_BLOWUP = 2
CODE_EXTINCT = 3
CODE_NONFINITE = 4
CODE_DT_UNDERFLOW = 5


@njit(cache=True)
def _reaction_rate(linf, r):
    if linf <= 0.0:
        return 0.0
    return (r - 1.0) * linf ** (r - 2.0)


@njit(cache=True)
def integrate_1d(u, pfx, qfx, hx, vol, eps2, r, safety, mode, phi, lam1, aux_eps,
                 t, t_stop, max_steps, linf_cap, l2sq_floor, flush_tol, dt_min,
                 linf_in):
    """Returns (steps, t, code, dt_last, diss, linf, l2sq)."""
    n = u.shape[0]
    g = np.empty(n + 1)
    flux = np.empty(n + 1)
    rhs = np.empty(n)
    inv_h2 = 1.0 / (hx * hx)
    linf = linf_in
    l2sq = 0.0
    diss = 0.0
    dt = 0.0
    steps = 0
    while steps < max_steps:
        # fluxes and max diffusivity
        g[0] = 2.0 * u[0] / hx
        g[n] = -2.0 * u[n - 1] / hx
        for i in range(1, n):
            g[i] = (u[i] - u[i - 1]) / hx
        dmax = 0.0
        for i in range(n + 1):
            d = (g[i] * g[i] + eps2) ** qfx[i]
            if d > dmax:
                dmax = d
            flux[i] = d * g[i]
        if not np.isfinite(dmax):
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        for i in range(n):
            rhs[i] = (flux[i + 1] - flux[i]) / hx
        if mode == 1:
            for i in range(n):
                v = u[i]
                if v > 0.0:
                    rhs[i] += v ** (r - 1.0)
                elif v < 0.0:
                    rhs[i] -= (-v) ** (r - 1.0)
        elif mode == 2:
            for i in range(n):
                v = u[i]
                if v > 0.0:
                    rhs[i] += lam1 * v**r / (aux_eps * phi[i] + lam1 * v)

        # dt control
        rmax = _reaction_rate(linf, r) if mode != 0 else 0.0
        dt = 1.0 / (2.0 * dmax * inv_h2)
        dt_react = 1.0 / (rmax + DT_DELTA)
        if dt_react < dt:
            dt = dt_react
        dt *= safety
        if not np.isfinite(dt) or dt < dt_min:
            return steps, t, CODE_DT_UNDERFLOW, dt, diss, linf, l2sq
        hit_stop = False
        if t + dt >= t_stop:
            dt = t_stop - t
            hit_stop = True

        # update, flush, norms, dissipation
        ut2 = 0.0
        linf = 0.0
        l2sq = 0.0
        finite = True
        for i in range(n):
            ut2 += rhs[i] * rhs[i]
            v = u[i] + dt * rhs[i]
            if not np.isfinite(v):
                finite = False
            if -flush_tol < v < flush_tol:
                v = 0.0
            u[i] = v
            a = abs(v)
            if a > linf:
                linf = a
            l2sq += v * v
        l2sq *= vol
        diss += dt * ut2 * vol
        steps += 1
        t = t_stop if hit_stop else t + dt
        if not finite:
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        if linf >= linf_cap:
            return steps, t, CODE_BLOWUP, dt, diss, linf, l2sq
        if l2sq <= l2sq_floor:
            return steps, t, CODE_EXTINCT, dt, diss, linf, l2sq
        if hit_stop:
            return steps, t, CODE_TSTOP, dt, diss, linf, l2sq
    return steps, t, CODE_CHUNK, dt, diss, linf, l2sq


@njit(cache=True)
def integrate_2d(u, pfx, qfx, pfy, qfy, hx, hy, vol, eps2, r, safety, mode, phi,
                 lam1, aux_eps, t, t_stop, max_steps, linf_cap, l2sq_floor,
                 flush_tol, dt_min, linf_in):
    nx, ny = u.shape
    gx = np.empty((nx + 1, ny))
    gy = np.empty((nx, ny + 1))
    cgx = np.empty((nx, ny))  # cell-averaged x-gradient
    cgy = np.empty((nx, ny))
    fx = np.empty((nx + 1, ny))
    fy = np.empty((nx, ny + 1))
    rhs = np.empty((nx, ny))
    inv_sum = 1.0 / (hx * hx) + 1.0 / (hy * hy)
    linf = linf_in
    l2sq = 0.0
    diss = 0.0
    dt = 0.0
    steps = 0
    while steps < max_steps:
        for j in range(ny):
            gx[0, j] = 2.0 * u[0, j] / hx
            gx[nx, j] = -2.0 * u[nx - 1, j] / hx
            for i in range(1, nx):
                gx[i, j] = (u[i, j] - u[i - 1, j]) / hx
        for i in range(nx):
            gy[i, 0] = 2.0 * u[i, 0] / hy
            gy[i, ny] = -2.0 * u[i, ny - 1] / hy
            for j in range(1, ny):
                gy[i, j] = (u[i, j] - u[i, j - 1]) / hy
        for i in range(nx):
            for j in range(ny):
                cgx[i, j] = 0.5 * (gx[i, j] + gx[i + 1, j])
                cgy[i, j] = 0.5 * (gy[i, j] + gy[i, j + 1])
        dmax = 0.0
        for i in range(nx + 1):
            for j in range(ny):
                if i == 0:
                    tang = cgy[0, j]
                elif i == nx:
                    tang = cgy[nx - 1, j]
                else:
                    tang = 0.5 * (cgy[i - 1, j] + cgy[i, j])
                s = gx[i, j] * gx[i, j] + tang * tang + eps2
                d = s ** qfx[i, j]
                if d > dmax:
                    dmax = d
                fx[i, j] = d * gx[i, j]
        for i in range(nx):
            for j in range(ny + 1):
                if j == 0:
                    tang = cgx[i, 0]
                elif j == ny:
                    tang = cgx[i, ny - 1]
                else:
                    tang = 0.5 * (cgx[i, j - 1] + cgx[i, j])
                s = gy[i, j] * gy[i, j] + tang * tang + eps2
                d = s ** qfy[i, j]
                if d > dmax:
                    dmax = d
                fy[i, j] = d * gy[i, j]
        if not np.isfinite(dmax):
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        for i in range(nx):
            for j in range(ny):
                val = (fx[i + 1, j] - fx[i, j]) / hx + (fy[i, j + 1] - fy[i, j]) / hy
                if mode == 1:
                    v = u[i, j]
                    if v > 0.0:
                        val += v ** (r - 1.0)
                    elif v < 0.0:
                        val -= (-v) ** (r - 1.0)
                elif mode == 2:
                    v = u[i, j]
                    if v > 0.0:
                        val += lam1 * v**r / (aux_eps * phi[i, j] + lam1 * v)
                rhs[i, j] = val

        rmax = _reaction_rate(linf, r) if mode != 0 else 0.0
        dt = 1.0 / (2.0 * dmax * inv_sum)
        dt_react = 1.0 / (rmax + DT_DELTA)
        if dt_react < dt:
            dt = dt_react
        dt *= safety
        if not np.isfinite(dt) or dt < dt_min:
            return steps, t, CODE_DT_UNDERFLOW, dt, diss, linf, l2sq
        hit_stop = False
        if t + dt >= t_stop:
            dt = t_stop - t
            hit_stop = True

        ut2 = 0.0
        linf = 0.0
        l2sq = 0.0
        finite = True
        for i in range(nx):
            for j in range(ny):
                rv = rhs[i, j]
                ut2 += rv * rv
                v = u[i, j] + dt * rv
                if not np.isfinite(v):
                    finite = False
                if -flush_tol < v < flush_tol:
                    v = 0.0
                u[i, j] = v
                a = abs(v)
                if a > linf:
                    linf = a
                l2sq += v * v
        l2sq *= vol
        diss += dt * ut2 * vol
        steps += 1
        t = t_stop if hit_stop else t + dt
        if not finite:
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        if linf >= linf_cap:
            return steps, t, CODE_BLOWUP, dt, diss, linf, l2sq
        if l2sq <= l2sq_floor:
            return steps, t, CODE_EXTINCT, dt, diss, linf, l2sq
        if hit_stop:
            return steps, t, CODE_TSTOP, dt, diss, linf, l2sq
    return steps, t, CODE_CHUNK, dt, diss, linf, l2sq


@njit(cache=True)
def integrate_3d(u, pfx, qfx, pfy, qfy, pfz, qfz, hx, hy, hz, vol, eps2, r,
                 safety, mode, phi, lam1, aux_eps, t, t_stop, max_steps,
                 linf_cap, l2sq_floor, flush_tol, dt_min, linf_in):
    nx, ny, nz = u.shape
    gx = np.empty((nx + 1, ny, nz))
    gy = np.empty((nx, ny + 1, nz))
    gz = np.empty((nx, ny, nz + 1))
    cgx = np.empty((nx, ny, nz))
    cgy = np.empty((nx, ny, nz))
    cgz = np.empty((nx, ny, nz))
    fx = np.empty((nx + 1, ny, nz))
    fy = np.empty((nx, ny + 1, nz))
    fz = np.empty((nx, ny, nz + 1))
    rhs = np.empty((nx, ny, nz))
    inv_sum = 1.0 / (hx * hx) + 1.0 / (hy * hy) + 1.0 / (hz * hz)
    linf = linf_in
    l2sq = 0.0
    diss = 0.0
    dt = 0.0
    steps = 0
    while steps < max_steps:
        for j in range(ny):
            for k in range(nz):
                gx[0, j, k] = 2.0 * u[0, j, k] / hx
                gx[nx, j, k] = -2.0 * u[nx - 1, j, k] / hx
                for i in range(1, nx):
                    gx[i, j, k] = (u[i, j, k] - u[i - 1, j, k]) / hx
        for i in range(nx):
            for k in range(nz):
                gy[i, 0, k] = 2.0 * u[i, 0, k] / hy
                gy[i, ny, k] = -2.0 * u[i, ny - 1, k] / hy
                for j in range(1, ny):
                    gy[i, j, k] = (u[i, j, k] - u[i, j - 1, k]) / hy
        for i in range(nx):
            for j in range(ny):
                gz[i, j, 0] = 2.0 * u[i, j, 0] / hz
                gz[i, j, nz] = -2.0 * u[i, j, nz - 1] / hz
                for k in range(1, nz):
                    gz[i, j, k] = (u[i, j, k] - u[i, j, k - 1]) / hz
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    cgx[i, j, k] = 0.5 * (gx[i, j, k] + gx[i + 1, j, k])
                    cgy[i, j, k] = 0.5 * (gy[i, j, k] + gy[i, j + 1, k])
                    cgz[i, j, k] = 0.5 * (gz[i, j, k] + gz[i, j, k + 1])
        dmax = 0.0
        for i in range(nx + 1):
            for j in range(ny):
                for k in range(nz):
                    if i == 0:
                        ty = cgy[0, j, k]
                        tz = cgz[0, j, k]
                    elif i == nx:
                        ty = cgy[nx - 1, j, k]
                        tz = cgz[nx - 1, j, k]
                    else:
                        ty = 0.5 * (cgy[i - 1, j, k] + cgy[i, j, k])
                        tz = 0.5 * (cgz[i - 1, j, k] + cgz[i, j, k])
                    s = gx[i, j, k] ** 2 + ty * ty + tz * tz + eps2
                    d = s ** qfx[i, j, k]
                    if d > dmax:
                        dmax = d
                    fx[i, j, k] = d * gx[i, j, k]
        for i in range(nx):
            for j in range(ny + 1):
                for k in range(nz):
                    if j == 0:
                        tx = cgx[i, 0, k]
                        tz = cgz[i, 0, k]
                    elif j == ny:
                        tx = cgx[i, ny - 1, k]
                        tz = cgz[i, ny - 1, k]
                    else:
                        tx = 0.5 * (cgx[i, j - 1, k] + cgx[i, j, k])
                        tz = 0.5 * (cgz[i, j - 1, k] + cgz[i, j, k])
                    s = gy[i, j, k] ** 2 + tx * tx + tz * tz + eps2
                    d = s ** qfy[i, j, k]
                    if d > dmax:
                        dmax = d
                    fy[i, j, k] = d * gy[i, j, k]
        for i in range(nx):
            for j in range(ny):
                for k in range(nz + 1):
                    if k == 0:
                        tx = cgx[i, j, 0]
                        ty = cgy[i, j, 0]
                    elif k == nz:
                        tx = cgx[i, j, nz - 1]
                        ty = cgy[i, j, nz - 1]
                    else:
                        tx = 0.5 * (cgx[i, j, k - 1] + cgx[i, j, k])
                        ty = 0.5 * (cgy[i, j, k - 1] + cgy[i, j, k])
                    s = gz[i, j, k] ** 2 + tx * tx + ty * ty + eps2
                    d = s ** qfz[i, j, k]
                    if d > dmax:
                        dmax = d
                    fz[i, j, k] = d * gz[i, j, k]
        if not np.isfinite(dmax):
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    val = ((fx[i + 1, j, k] - fx[i, j, k]) / hx
                           + (fy[i, j + 1, k] - fy[i, j, k]) / hy
                           + (fz[i, j, k + 1] - fz[i, j, k]) / hz)
                    if mode == 1:
                        v = u[i, j, k]
                        if v > 0.0:
                            val += v ** (r - 1.0)
                        elif v < 0.0:
                            val -= (-v) ** (r - 1.0)
                    elif mode == 2:
                        v = u[i, j, k]
                        if v > 0.0:
                            val += lam1 * v**r / (aux_eps * phi[i, j, k] + lam1 * v)
                    rhs[i, j, k] = val

        rmax = _reaction_rate(linf, r) if mode != 0 else 0.0
        dt = 1.0 / (2.0 * dmax * inv_sum)
        dt_react = 1.0 / (rmax + DT_DELTA)
        if dt_react < dt:
            dt = dt_react
        dt *= safety
        if not np.isfinite(dt) or dt < dt_min:
            return steps, t, CODE_DT_UNDERFLOW, dt, diss, linf, l2sq
        hit_stop = False
        if t + dt >= t_stop:
            dt = t_stop - t
            hit_stop = True

        ut2 = 0.0
        linf = 0.0
        l2sq = 0.0
        finite = True
        for i in range(nx):
            for j in range(ny):
                for k in range(nz):
                    rv = rhs[i, j, k]
                    ut2 += rv * rv
                    v = u[i, j, k] + dt * rv
                    if not np.isfinite(v):
                        finite = False
                    if -flush_tol < v < flush_tol:
                        v = 0.0
                    u[i, j, k] = v
                    a = abs(v)
                    if a > linf:
                        linf = a
                    l2sq += v * v
        l2sq *= vol
        diss += dt * ut2 * vol
        steps += 1
        t = t_stop if hit_stop else t + dt
        if not finite:
            return steps, t, CODE_NONFINITE, dt, diss, linf, l2sq
        if linf >= linf_cap:
            return steps, t, CODE_BLOWUP, dt, diss, linf, l2sq
        if l2sq <= l2sq_floor:
            return steps, t, CODE_EXTINCT, dt, diss, linf, l2sq
        if hit_stop:
            return steps, t, CODE_TSTOP, dt, diss, linf, l2sq
    return steps, t, CODE_CHUNK, dt, diss, linf, l2sq
