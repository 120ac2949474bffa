"""Run-time residual monitoring.

Everything the evolved system should keep at zero is evaluated here:

* the monitored section: spinor covariant derivative, gauge deviation E and
  its covariant derivative, the Clifford action V.phi, and the causal norm
  g(V,V);
* consistency residuals of the evolved rows themselves (Dirac, f-transport,
  slot-vs-stencil drift);
* the Ricci residual Ric - f V x V + Sym(grad E), whose second time
  derivative of g comes from stored slice history;
* Gauss-Codazzi residuals tying the ambient Einstein tensor to slice data.

Time derivatives of evolved fields are taken from the right-hand side, not
re-stenciled, so every quantity is available from t=0 on and converges at
the scheme's order.  Only the Ricci residual needs history (for d_t k); it
reports nan until three slices exist.
"""

import csv

import numpy as np

from .clifford import clifford_action, current_norm
from .constraints import InitialSurfaceData, codazzi_residual, spatial_jets
from .geometry import (d_gauge_deviation, deriv1, gauge_deviation,
                       inverse_metric, ricci_from_jet)

__all__ = [
    "REPORT_COLUMNS",
    "fornberg_weights",
    "sup_norm",
    "l2_norm",
    "monitor_row",
    "ricci_fields",
    "gauss_codazzi_residuals",
    "write_rows_csv",
]

# fixed CSV column order
REPORT_COLUMNS = [
    "t",
    "sup_grad_phi", "l2_grad_phi",
    "sup_grad_E", "l2_grad_E",
    "sup_V_phi", "l2_V_phi",
    "sup_E", "l2_E",
    "sup_g_VV", "l2_g_VV",
    "ricci_residual", "ricci_plain",
    "dirac_residual", "f_transport",
    "slot_consistency",
    "u_phi_min", "u_phi_max",
]


def fornberg_weights(z, x, m=1):
    """Finite difference weights on arbitrary nodes x for derivatives
    0..m at z (Fornberg's recursion).  Returns (m+1, len(x))."""
    x = np.asarray(x, float)
    npts = len(x)
    c = np.zeros((m + 1, npts))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1]
                                    - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def sup_norm(arr, grid_ndim=None):
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def l2_norm(arr, grid_ndim):
    """Pointwise squared magnitude summed over tensor axes, averaged over
    the grid, square-rooted."""
    flat = np.abs(arr).reshape(arr.shape[:grid_ndim] + (-1,))
    return float(np.sqrt(np.mean(np.sum(flat**2, axis=-1))))


def _second_jet(system, state, aux, dt_k):
    """Full second jet of g: spatial rows from stencils of the slots, mixed
    rows from stencils of k, the time-time row supplied by the caller."""
    m = system.n + 1
    ddg = np.empty(state.g.shape[:-2] + (m, m, m, m))
    ddg[..., 0, 0, :, :] = dt_k
    dk = aux["dk"]
    for i in range(system.n):
        ddg[..., 0, 1 + i, :, :] = dk[..., i, :, :]
        ddg[..., 1 + i, 0, :, :] = dk[..., i, :, :]
    dslots = aux["dslots"]
    sym = 0.5 * (dslots + np.swapaxes(dslots, -4, -3))
    ddg[..., 1:, 1:, :, :] = sym
    return ddg


def _nabla_e(system, state, aux, ddg):
    """Covariant derivative of the gauge deviation, all m directions."""
    g, ginv, dg = state.g, aux["ginv"], aux["dg"]
    e_cov = gauge_deviation(g, dg, aux["bg_gamma"], ginv)
    de = d_gauge_deviation(g, dg, ddg, aux["bg_gamma"], aux["bg_dgamma"],
                           ginv)
    nabla = de - np.einsum("...lkn,...l->...kn", aux["gamma"], e_cov)
    return e_cov, nabla


def ricci_fields(system, state, aux, dt_k):
    """(Ricci tensor, full residual, plain Ricci sup) for a given time-time
    second derivative of g."""
    g = state.g
    dg = aux["dg"]
    ddg = _second_jet(system, state, aux, dt_k)
    ric = ricci_from_jet(g, dg, ddg)
    _, nabla_e = _nabla_e(system, state, aux, ddg)
    sym_e = 0.5 * (nabla_e + np.swapaxes(nabla_e, -1, -2))
    vv = np.einsum("...m,...n->...mn", aux["v_low"], aux["v_low"])
    resid = ric - state.f[..., None, None] * vv + sym_e
    return ric, resid


def _history_dt_k(state, history, max_window=5):
    """d_t k at the newest slice by one-sided differencing of stored k."""
    if history is None or len(history) < 3:
        return None
    window = list(history)[-min(len(history), max_window):]
    times = np.array([t for t, _ in window])
    if times[-1] != state.t:
        return None
    w = fornberg_weights(state.t, times, 1)[1]
    dt_k = np.zeros_like(state.k)
    for wi, (_, st) in zip(w, window):
        dt_k = dt_k + wi * st.k
    return dt_k


def monitor_row(system, state, history=None):
    """One diagnostics row: every monitored norm at this slice."""
    nd = len(system.grid.shape)
    rep = system.rep
    dot, aux = system.rhs(state, want_aux=True)
    z, omega, v_frame = aux["z"], aux["omega"], aux["v_frame"]

    m = system.n + 1
    dphi_full = np.empty(state.phi.shape[:-1] + (m, rep.dim), complex)
    dphi_full[..., 0, :] = aux["dt_phi"]
    dphi_full[..., 1:, :] = aux["dphi"]
    grad_phi = (np.einsum("...md,...mk->...dk", z, dphi_full)
                + np.einsum("...dij,...j->...di", omega, state.phi))

    ddg = _second_jet(system, state, aux, aux["dt_k"])
    e_cov, nabla_e = _nabla_e(system, state, aux, ddg)
    grad_e = np.einsum("...kd,...kn->...dn", z, nabla_e)

    v_phi = clifford_action(rep, v_frame, state.phi)
    g_vv = current_norm(rep, v_frame)

    dirac = np.einsum("a,aij,...aj->...i", system.eps, rep.gamma, grad_phi)
    f_trans = (aux["v"][..., 0] * aux["dt_f"]
               + np.einsum("...i,...i->...", aux["v"][..., 1:], aux["df"]))

    stencil = np.stack([deriv1(state.g, system.grid, i, system.order)
                        for i in range(system.n)], axis=-3)
    slot_drift = sup_norm(state.dgs - stencil)

    u_phi = np.einsum("...i,...i->...", state.phi,
                      np.conj(state.phi)).real

    dt_k_hist = _history_dt_k(state, history)
    if dt_k_hist is None:
        ricci_res, ricci_plain = np.nan, np.nan
    else:
        ric, resid = ricci_fields(system, state, aux, dt_k_hist)
        ricci_res = sup_norm(resid)
        ricci_plain = sup_norm(ric)

    return {
        "t": state.t,
        "sup_grad_phi": sup_norm(grad_phi), "l2_grad_phi": l2_norm(grad_phi, nd),
        "sup_grad_E": sup_norm(grad_e), "l2_grad_E": l2_norm(grad_e, nd),
        "sup_V_phi": sup_norm(v_phi), "l2_V_phi": l2_norm(v_phi, nd),
        "sup_E": sup_norm(e_cov), "l2_E": l2_norm(e_cov, nd),
        "sup_g_VV": sup_norm(g_vv), "l2_g_VV": l2_norm(g_vv, nd),
        "ricci_residual": ricci_res, "ricci_plain": ricci_plain,
        "dirac_residual": sup_norm(dirac), "f_transport": sup_norm(f_trans),
        "slot_consistency": slot_drift,
        "u_phi_min": float(np.min(u_phi)), "u_phi_max": float(np.max(u_phi)),
    }


def gauss_codazzi_residuals(system, state):
    """Hypersurface identity residuals on a shift-free slice.

    Compares the ambient Einstein tensor contracted with the unit normal
    against the slice expressions:

        G(T,T)   vs  (scal_sigma - tr(W^2) + (tr W)^2) / 2
        G(T,e_i) vs  (d trW + div W)_i

    Both contractions are independent of the time-time second derivative of
    g, which is taken from the evolved equation for concreteness.
    """
    if float(np.max(np.abs(state.g[..., 0, 1:]))) > 1e-12:
        raise ValueError("Gauss-Codazzi check needs a shift-free slice")
    dot, aux = system.rhs(state, want_aux=True)
    g = state.g
    ddg = _second_jet(system, state, aux, aux["dt_k"])
    ric = ricci_from_jet(g, aux["dg"], ddg)
    scal = np.einsum("...mn,...mn->...", aux["ginv"], ric)
    ein = ric - 0.5 * scal[..., None, None] * g

    t_vec = aux["z"][..., :, 0]
    g_tt = np.einsum("...mn,...m,...n->...", ein, t_vec, t_vec)
    g_tx = np.einsum("...mn,...m->...n", ein, t_vec)[..., 1:]

    lam = np.sqrt(-g[..., 0, 0])
    g_sigma = g[..., 1:, 1:]
    w_low = -state.k[..., 1:, 1:] / (2 * lam[..., None, None])
    w_mix = np.einsum("...ik,...kj->...ij", inverse_metric(g_sigma), w_low)

    dg_s, ddg_s = spatial_jets(g_sigma, system.grid, system.order)
    scal_sigma = np.einsum("...ij,...ij->...", inverse_metric(g_sigma),
                           ricci_from_jet(g_sigma, dg_s, ddg_s))
    tr_w = np.einsum("...ii->...", w_mix)
    tr_w2 = np.einsum("...ij,...ji->...", w_mix, w_mix)
    ham = 0.5 * (scal_sigma - tr_w2 + tr_w**2)

    data = InitialSurfaceData(system.grid, g_sigma, w_mix,
                              state.phi, lam)
    mom = codazzi_residual(data, system.order)

    return {
        "hamiltonian": sup_norm(g_tt - ham),
        "momentum": sup_norm(g_tx - mom),
        "g_tt": g_tt,
        "ham_slice": ham,
    }


def write_rows_csv(rows, path, columns=None):
    """Delimited time series; columns default to REPORT_COLUMNS filtered to
    the keys actually present."""
    if not rows:
        raise ValueError("no rows to write")
    if columns is None:
        columns = [c for c in REPORT_COLUMNS if c in rows[0]]
        columns += [c for c in rows[0] if c not in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})
    return columns
