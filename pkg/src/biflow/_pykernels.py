"""Pure-numpy implementations of the hot kernels.

Signatures mirror the compiled ``_ckernels`` module exactly.  Fields are
passed as flat ``(m, N**4)`` arrays and ``nodes`` are flat node indices
whose eight lattice neighbours all exist.  Arguments named ``*_c`` are
compact: column ``i`` belongs to ``nodes[i]``.  Outputs are written in place.
"""
import numpy as np

NAME = "python"


def _stencil_sum(u, nodes, offs):
    acc = u[:, nodes + offs[0]].copy()
    for off in offs[1:]:
        acc += u[:, nodes + off]
    return acc


def lap_nodes(u, nodes, offs, inv_h2, out):
    """Full-size output: ``out[:, nodes] = Delta_h u``."""
    out[:, nodes] = (_stencil_sum(u, nodes, offs) - 8.0 * u[:, nodes]) * inv_h2


def tension_nodes(u, nodes, offs, inv_h2, a_c, s_c, tau_c):
    """``a = Delta_h u``, ``s = <u, a>``, ``tau = a - s u`` at ``nodes`` (compact)."""
    un = u[:, nodes]
    an = (_stencil_sum(u, nodes, offs) - 8.0 * un) * inv_h2
    sn = np.sum(un * an, axis=0)
    a_c[:] = an
    s_c[:] = sn
    tau_c[:] = an - sn * un


def intrinsic_grad(u, a_c, s_c, tau_c, wl_c, lap, free, free_pos, offs, inv_h2, H, g_c):
    """Exact gradient of ``1/4 sum_p wl_p |tau_p|^2`` at the ``free`` nodes.

    With ``G = wl tau / 2`` and ``c = <G, u>`` the gradient is
    ``L^T (G - c u) - c a - s G`` where ``L^T`` is the plain stencil.
    ``free_pos`` locates each free node inside ``lap``.  ``H`` is a
    full-size scratch array that must be zero on entry; it is zero on exit.
    """
    G = 0.5 * wl_c * tau_c
    ul = u[:, lap]
    cc = np.sum(G * ul, axis=0)
    H[:, lap] = G - cc * ul
    lt = (_stencil_sum(H, free, offs) - 8.0 * H[:, free]) * inv_h2
    g_c[:] = lt - cc[free_pos] * a_c[:, free_pos] - s_c[free_pos] * G[:, free_pos]
    H[:, lap] = 0.0


def tangent_nodes(u, g_c, nodes, out_c):
    """``out = g - <g, u> u`` at ``nodes`` (compact in and out)."""
    un = u[:, nodes]
    out_c[:] = g_c - np.sum(g_c * un, axis=0) * un


def project_step(u, d_c, nodes, dt, out):
    """``out[:, nodes] = (u - dt d) / |u - dt d|`` with ``d`` compact and ``out`` full-size."""
    y = u[:, nodes] - dt * d_c
    out[:, nodes] = y / np.sqrt(np.sum(y * y, axis=0))


def gradsq_nodes(u, cols, coef, out):
    """``out[i] = sum_{k, c} (sum_j coef[k, j, i] u[c, cols[k, j, i]])^2``."""
    acc = np.zeros(out.shape[0])
    for k in range(4):
        d = (coef[k, 0] * u[:, cols[k, 0]] + coef[k, 1] * u[:, cols[k, 1]]
             + coef[k, 2] * u[:, cols[k, 2]])
        acc += np.sum(d * d, axis=0)
    out[:] = acc


def green_sum(tx, sx, coef, c, self_index, out, nthreads=1):
    """``out[t] = sum_j coef[j] G(tx[:, t], sx[:, j])``, skipping ``j == self_index[t]``."""
    T = tx.shape[1]
    s2 = np.sum(sx * sx, axis=0)
    chunk = max(1, 2_000_000 // max(sx.shape[1], 1))
    for start in range(0, T, chunk):
        stop = min(T, start + chunk)
        x = tx[:, start:stop]
        x2 = np.sum(x * x, axis=0)[:, None]
        dot = x.T @ sx
        d2 = np.maximum(x2 + s2[None, :] - 2.0 * dot, 0.0)
        q = x2 * s2[None, :] - 2.0 * dot + 1.0
        rows = np.arange(stop - start)
        si = self_index[start:stop]
        has_self = si >= 0
        d2[rows[has_self], si[has_self]] = 1.0
        with np.errstate(divide="ignore"):
            kern = 0.5 * np.log(d2 / q) - d2 / (2.0 * q) + 0.5
        kern[rows[has_self], si[has_self]] = 0.0
        out[start:stop] = c * (kern @ coef)


def intrinsic_change(u, v, lap, offs, inv_h2, s_c, tau_c, a2_c, tau2_c, wl_c):
    """``I(v) - I(u)`` from ``delta = v - u`` and both tension caches, linear in ``delta``."""
    delta = v - u
    n = lap.size
    ld, js, jt = np.empty((u.shape[0], n)), np.empty(n), np.empty((u.shape[0], n))
    tension_nodes(delta, lap, offs, inv_h2, ld, js, jt)
    d, ul, ul2 = delta[:, lap], u[:, lap], v[:, lap]
    ds = np.sum(d * a2_c, axis=0) + np.sum(ul * ld, axis=0)
    dtau = ld - ds * ul2 - s_c * d
    return 0.25 * float(np.sum(wl_c * np.sum(dtau * (tau_c + tau2_c), axis=0)))
