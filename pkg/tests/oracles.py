"""Independent reference computations the tests check the engine against.

These deliberately avoid the sweep solver's code path: the power-balance
oracle solves the admittance-form bus equations with a general-purpose
Newton solver, and the traversal oracle re-derives radiality facts from raw
adjacency.
"""

import numpy as np
from scipy.optimize import root


def two_bus_voltage_pu(p_pu, q_pu, r_pu, x_pu, v1_pu=1.0):
    """Closed-form receiving-end voltage magnitude of the two-bus case."""
    b = 2 * (p_pu * r_pu + q_pu * x_pu) - v1_pu ** 2
    c = (p_pu ** 2 + q_pu ** 2) * (r_pu ** 2 + x_pu ** 2)
    u = (-b + np.sqrt(b * b - 4 * c)) / 2
    return np.sqrt(u)


def power_balance_voltages(view, s_extraction_va):
    """Solve the bus power-balance equations V*conj(Y V) = S_injected on the
    per-phase conductor graph with scipy's Newton (hybr) solver.

    Returns complex voltages per conductor index, or None if the solver
    fails. Independent of the sweep formulation: uses the full admittance
    matrix, not the tree structure.
    """
    n = view.n_cn
    y = np.zeros((n, n), dtype=complex)
    for p, c, z in zip(view.e_parent, view.e_child, view.e_z):
        adm = 1.0 / z if z != 0 else 1e9
        y[p, p] += adm
        y[c, c] += adm
        y[p, c] -= adm
        y[c, p] -= adm

    roots_idx = np.flatnonzero(view.cn_depth_arr == 0)
    free = np.flatnonzero(view.cn_depth_arr != 0)
    v_fixed = view.v_flat[roots_idx]
    s_inj = -np.asarray(s_extraction_va, dtype=complex)

    def residual(x):
        v = np.empty(n, dtype=complex)
        v[roots_idx] = v_fixed
        v[free] = x[: len(free)] + 1j * x[len(free):]
        mismatch = v * np.conj(y @ v) - s_inj
        return np.r_[mismatch[free].real, mismatch[free].imag]

    x0 = np.r_[view.v_flat[free].real, view.v_flat[free].imag]
    sol = root(residual, x0, method="hybr", tol=1e-12)
    if not sol.success:
        return None
    v = np.empty(n, dtype=complex)
    v[roots_idx] = v_fixed
    v[free] = sol.x[: len(free)] + 1j * sol.x[len(free):]
    return v


def reachable_from(network, config, start):
    """Plain BFS over in-service sections, ignoring the engine's view code."""
    from feederhc.network import _in_service_sections

    adj = {}
    for s in _in_service_sections(network, config):
        adj.setdefault(s.from_node, set()).add(s.to_node)
        adj.setdefault(s.to_node, set()).add(s.from_node)
    seen = {start}
    queue = [start]
    while queue:
        node = queue.pop()
        for nbr in adj.get(node, ()):
            if nbr not in seen:
                seen.add(nbr)
                queue.append(nbr)
    return seen


def percentile_by_sorting(values, pct):
    """Linear-interpolation percentile computed from first principles."""
    xs = sorted(values)
    if len(xs) == 1:
        return xs[0]
    pos = pct / 100 * (len(xs) - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return xs[lo] * (1 - frac) + xs[hi] * frac
