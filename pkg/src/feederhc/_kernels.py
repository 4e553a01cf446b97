"""Compiled inner loops for the batched sweep solver and criteria margins.

Case-major layout: each case (batch column) owns a contiguous row of the
voltage and current arrays, small enough to stay cache-resident while its
tree is swept to convergence independently of the other cases. Falls back
to vectorized numpy when numba is unavailable (set FEEDERHC_NO_NUMBA=1 to
force the fallback).
"""

from __future__ import annotations

import os

import numpy as np

HAVE_NUMBA = False
if not os.environ.get("FEEDERHC_NO_NUMBA"):
    try:
        import numba
        HAVE_NUMBA = True
    except ImportError:
        numba = None


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


VOLT_VAR_DAMPING = 0.4


@_njit
def sweep_kernel(v, s_conj, e_parent, e_child, e_z, inv_vb2, tol2, max_iter,
                 vv_rows, vv_base, vv_rated, vv_inv_vb, vv_knees,
                 i_edge, converged):
    """Per-case forward/backward sweeps to a fixed point.

    v: (C, N) complex volts, updated in place (roots never written).
    s_conj: (C, N) conj of extraction VA. i_edge: (C, E) out.
    Edges are sorted by parent depth, so a reverse pass accumulates leaf
    currents rootward and a forward pass propagates voltage drops leafward.
    The volt-var droop is folded into the fixed point with damping (the raw
    droop can out-slope the network sensitivity and oscillate).
    Returns the worst-case iteration count.
    """
    n_cases, n_cn = v.shape
    n_edges = e_parent.size
    n_vv = vv_rows.size
    worst_it = 0
    for c in range(n_cases):
        acc = np.empty(n_cn, dtype=np.complex128)
        vv_q = np.zeros(n_vv)
        vc = v[c]
        sc = s_conj[c]
        ic = i_edge[c]
        it = 0
        ok = False
        while it < max_iter:
            it += 1
            if n_vv > 0:
                for k in range(n_vv):
                    row = vv_rows[k]
                    vm = abs(vc[row]) * vv_inv_vb[k]
                    if vm <= vv_knees[0]:
                        frac = 1.0
                    elif vm < vv_knees[1]:
                        frac = (vv_knees[1] - vm) / (vv_knees[1] - vv_knees[0])
                    elif vm <= vv_knees[2]:
                        frac = 0.0
                    elif vm < vv_knees[3]:
                        frac = -(vm - vv_knees[2]) / (vv_knees[3] - vv_knees[2])
                    else:
                        frac = -1.0
                    vv_q[k] += VOLT_VAR_DAMPING * (frac * vv_rated[k] - vv_q[k])
                    sc[row] = np.conj(vv_base[k] - 1j * vv_q[k])
            for n in range(n_cn):
                w = vc[n].real * vc[n].real + vc[n].imag * vc[n].imag
                acc[n] = sc[n] * vc[n] / w
            for e in range(n_edges - 1, -1, -1):
                cur = acc[e_child[e]]
                ic[e] = cur
                acc[e_parent[e]] += cur
            dv2 = 0.0
            for e in range(n_edges):
                vn = vc[e_parent[e]] - e_z[e] * ic[e]
                d = vn - vc[e_child[e]]
                step = (d.real * d.real + d.imag * d.imag) * inv_vb2[e]
                if step > dv2:
                    dv2 = step
                vc[e_child[e]] = vn
            if dv2 <= tol2:
                ok = True
                break
        finite = True
        for n in range(n_cn):
            if not (np.isfinite(vc[n].real) and np.isfinite(vc[n].imag)):
                finite = False
                break
        converged[c] = ok and finite
        if it > worst_it:
            worst_it = it
    return worst_it


@_njit
def margins_kernel(v, i_edge, inv_r2, inv_vb, base_vmag, converged,
                   thermal_on, v_min, v_max, dev_on, dev_limit,
                   head_rows, head_par, head_ptr, dev_rows, dev_par, dev_ptr,
                   flow_scale, out):
    """Normalized criterion margins per case into out (7, C).

    Rows: thermal, under-voltage, over-voltage, deviation, head reverse flow,
    device reverse flow, convergence. Flows are evaluated only on the listed
    edge rows (head/device groups as CSR-style ptr arrays).
    """
    n_cases, n_cn = v.shape
    n_edges = i_edge.shape[1]
    inf = np.inf
    n_head = head_ptr.size - 1
    n_dev = dev_ptr.size - 1
    for c in range(n_cases):
        if not converged[c]:
            for k in range(6):
                out[k, c] = inf
            out[6, c] = -1.0
            continue
        vc = v[c]
        ic = i_edge[c]
        if thermal_on and n_edges > 0:
            tmax = 0.0
            for e in range(n_edges):
                t = (ic[e].real * ic[e].real + ic[e].imag * ic[e].imag) * inv_r2[e]
                if t > tmax:
                    tmax = t
            out[0, c] = 1.0 - np.sqrt(tmax)
        else:
            out[0, c] = inf
        lo = inf
        hi = -inf
        dmax = 0.0
        for n in range(n_cn):
            m = np.sqrt(vc[n].real * vc[n].real + vc[n].imag * vc[n].imag) * inv_vb[n]
            if m < lo:
                lo = m
            if m > hi:
                hi = m
            if dev_on:
                d = m - base_vmag[n]
                if d < 0.0:
                    d = -d
                if d > dmax:
                    dmax = d
        out[1, c] = lo - v_min
        out[2, c] = v_max - hi
        out[3, c] = dev_limit - dmax if dev_on else inf
        if n_head > 0:
            worst = inf
            for g in range(n_head):
                s = 0.0
                for k in range(head_ptr[g], head_ptr[g + 1]):
                    f = vc[head_par[k]] * np.conj(ic[head_rows[k]])
                    s += f.real
                s /= 1000.0
                if s < worst:
                    worst = s
            out[4, c] = worst / flow_scale
        else:
            out[4, c] = inf
        if n_dev > 0:
            worst = inf
            for g in range(n_dev):
                s = 0.0
                for k in range(dev_ptr[g], dev_ptr[g + 1]):
                    f = vc[dev_par[k]] * np.conj(ic[dev_rows[k]])
                    s += f.real
                s /= 1000.0
                if s < worst:
                    worst = s
            out[5, c] = worst / flow_scale
        else:
            out[5, c] = inf
        out[6, c] = inf
    return out


def warm_up():
    """Trigger compilation of both kernels on a 2-node toy problem."""
    if not HAVE_NUMBA:
        return
    v = np.array([[7200.0 + 0j, 7190.0 + 0j]])
    s = np.conj(np.array([[0j, 1000.0 + 0j]]))
    par = np.array([0], dtype=np.intp)
    ch = np.array([1], dtype=np.intp)
    z = np.array([0.1 + 0.2j])
    inv_vb2 = np.array([1 / 7200.0 ** 2])
    iedge = np.empty((1, 1), dtype=complex)
    conv = np.zeros(1, dtype=np.bool_)
    e = np.empty(0, dtype=np.intp)
    knees = np.array([0.96, 0.98, 1.02, 1.04])
    sweep_kernel(v, s, par, ch, z, inv_vb2, 1e-12, 50,
                 e, np.empty(0, dtype=complex), np.empty(0), np.empty(0), knees,
                 iedge, conv)
    out = np.empty((7, 1))
    margins_kernel(v, iedge, np.array([1e-6]), np.array([1 / 7200.0] * 2),
                   np.zeros(2), conv, True, 0.95, 1.05, True, 0.03,
                   ch, par, np.array([0, 1], dtype=np.intp),
                   e, e, np.array([0], dtype=np.intp), 1000.0, out)
