"""First-order symmetric hyperbolic evolution of metric, transport scalar
and spinor.

Unknowns, in checkpoint order:

    g      (m, m)     spacetime metric, m = n+1
    dgs    (n, m, m)  evolved spatial first derivatives of g
    k      (m, m)     time derivative of g
    f      scalar     Ricci source amplitude, transported along the current
    phi    (dim,)     spinor in the Gram-Schmidt frame of g

The metric sector evolves the gauge-reduced Ricci system sourced by
f V x V with V the Dirac current of phi; the spinor satisfies the Dirac
equation in the evolving frame; f is transported along V.  With admissible
initial data the gauge deviation covector E stays zero and the development
carries a parallel spinor.

Sign conventions for the spinor row (the Dirac equation multiplied by
gamma_0 and moved to the evolution side):

    (-sum_a eps_a zeta^0_a g0g_a) d_t phi
        = (sum_a eps_a zeta^j_a g0g_a) d_j phi
        + sum_a eps_a g0g_a omega(s_a) phi

with g0g_a = gamma_0 gamma_a Hermitian, so both sides realify to symmetric
blocks.  The f row keeps the eps_a factors of the frame expansion of V.
"""

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .clifford import (build_gamma, dirac_current, realify_matrix,
                       realify_vector)
from .constraints import (InitialSurfaceData, algebraic_residual, f_on_slice,
                          killing_residual)
from .geometry import (BackgroundMetric, FrameError, Grid, christoffel,
                       d_gauge_source, deriv1, frame, frame_derivative,
                       gauge_deviation, gauge_source, inverse_metric,
                       quad_term, spin_coefficients, spin_connection,
                       sym_cov_grad)

__all__ = [
    "State",
    "System",
    "SystemBlocks",
    "EvolutionConfig",
    "EvolutionResult",
    "build_initial_state",
    "assemble_blocks",
    "check_symmetric_hyperbolic",
    "cfl_dt",
    "step_rk4",
    "evolve",
]

# checkpoint layout, row-major over the grid
FIELD_ORDER = ("g", "dgs", "k", "f", "phi_re", "phi_im")


@dataclass
class State:
    """Evolution state on one time slice."""

    t: float
    g: np.ndarray
    dgs: np.ndarray
    k: np.ndarray
    f: np.ndarray
    phi: np.ndarray

    def copy(self):
        return State(self.t, self.g.copy(), self.dgs.copy(), self.k.copy(),
                     self.f.copy(), self.phi.copy())

    def pack(self):
        return np.concatenate([
            self.g.ravel(), self.dgs.ravel(), self.k.ravel(),
            self.f.ravel(), self.phi.real.ravel(), self.phi.imag.ravel()])

    @classmethod
    def unpack(cls, vec, template):
        out = []
        pos = 0
        for arr in (template.g, template.dgs, template.k, template.f):
            out.append(vec[pos:pos + arr.size].reshape(arr.shape))
            pos += arr.size
        size = template.phi.size
        re = vec[pos:pos + size].reshape(template.phi.shape)
        im = vec[pos + size:pos + 2 * size].reshape(template.phi.shape)
        return cls(template.t, out[0], out[1], out[2], out[3], re + 1j * im)


@dataclass
class SystemBlocks:
    """Pointwise matrices of A0 d_t u = sum_i A_i d_i u + b."""

    a0: np.ndarray
    ai: np.ndarray
    b: np.ndarray
    offsets: dict


class System:
    """Bundles grid, spinor representation, gauge background and stencil
    order; owns the right-hand side."""

    def __init__(self, grid: Grid, background: BackgroundMetric, order=4):
        if background.n != grid.n:
            raise ValueError("background dimension does not match grid")
        self.grid = grid
        self.background = background
        self.order = order
        self.rep = build_gamma(grid.n)
        self.eps = self.rep.eps

    @property
    def n(self):
        return self.grid.n

    def full_first_jet(self, state):
        """dg[..., lam, mu, nu] with the time row taken from k and the
        spatial rows from the evolved slots."""
        m = self.n + 1
        dg = np.empty(state.g.shape[:-2] + (m, m, m))
        dg[..., 0, :, :] = state.k
        dg[..., 1:, :, :] = state.dgs
        return dg

    def prepare(self, state):
        """Frame, connection, current and gauge-source data shared by the
        rhs, the block assembly and the diagnostics."""
        grid, order, rep = self.grid, self.order, self.rep
        n = self.n
        g = state.g
        ginv = inverse_metric(g)
        dg = self.full_first_jet(state)

        dk = np.stack([deriv1(state.k, grid, i, order) for i in range(n)],
                      axis=-3)
        dslots = np.stack([deriv1(state.dgs, grid, j, order)
                           for j in range(n)], axis=-4)
        dphi = np.stack([deriv1(state.phi, grid, i, order)
                         for i in range(n)], axis=-2)
        df = np.stack([deriv1(state.f, grid, i, order) for i in range(n)],
                      axis=-1)

        z = frame(g, self.eps)
        dz = frame_derivative(z, dg, self.eps)
        gam = christoffel(g, dg, ginv)
        coeffs = spin_coefficients(g, gam, z, dz)
        omega = spin_connection(coeffs, rep.gamma, self.eps)

        v_frame = dirac_current(rep, state.phi)
        v = np.einsum("...ma,...a->...m", z, v_frame)
        v_low = np.einsum("...mn,...n->...m", g, v)

        bg_gamma = self.background.christoffel(state.t, grid)
        bg_dgamma = self.background.dchristoffel(state.t, grid)
        f_cov = gauge_source(g, bg_gamma, ginv)
        df_cov = d_gauge_source(g, dg, bg_gamma, bg_dgamma, ginv)
        grad_f = sym_cov_grad(g, dg, f_cov, df_cov, gam)
        quad = quad_term(g, dg, ginv, gam)

        source = (-2 * quad - 2 * grad_f
                  + 2 * state.f[..., None, None]
                  * np.einsum("...m,...n->...mn", v_low, v_low))
        b_spinor = np.einsum("a,aik,...akl,...l->...i", self.eps, rep.g0g,
                             omega, state.phi)

        return {
            "ginv": ginv, "dg": dg, "z": z, "dz": dz, "gamma": gam,
            "coeffs": coeffs, "omega": omega, "v_frame": v_frame, "v": v,
            "v_low": v_low, "bg_gamma": bg_gamma, "bg_dgamma": bg_dgamma,
            "f_cov": f_cov, "df_cov": df_cov, "grad_f": grad_f, "quad": quad,
            "k_source": source, "b_spinor": b_spinor,
            "dk": dk, "dslots": dslots, "dphi": dphi, "df": df,
        }

    def rhs(self, state, want_aux=False):
        aux = self.prepare(state)
        ginv, z, v = aux["ginv"], aux["z"], aux["v"]
        dk, dslots, dphi, df = (aux["dk"], aux["dslots"], aux["dphi"],
                                aux["df"])

        dt_g = state.k
        # the slot row g^{ij} d_t dgs_j = g^{ij} d_i k is, after inverting
        # the positive matrix g^{ij}, just d_t dgs_j = d_j k
        dt_dgs = dk

        flux = (2 * np.einsum("...j,...jmn->...mn", ginv[..., 0, 1:], dk)
                + np.einsum("...ij,...jimn->...mn", ginv[..., 1:, 1:],
                            dslots))
        dt_k = (flux + aux["k_source"]) / (-ginv[..., 0, 0])[..., None, None]

        v0 = v[..., 0]
        if np.any(v0 <= 0):
            bad = np.unravel_index(int(np.argmin(v0)), v0.shape)
            raise FrameError(f"transport speed V^0 lost positivity at grid "
                             f"index {bad}")
        dt_f = -np.einsum("...i,...i->...", v[..., 1:], df) / v0

        a0_s = -np.einsum("a,...a,aij->...ij", self.eps, z[..., 0, :],
                          self.rep.g0g)
        rhs_s = (np.einsum("a,...ja,aik,...jk->...i", self.eps,
                           z[..., 1:, :], self.rep.g0g, dphi)
                 + aux["b_spinor"])
        dt_phi = np.linalg.solve(a0_s, rhs_s[..., None])[..., 0]

        dot = State(1.0, dt_g, dt_dgs, dt_k, np.asarray(dt_f, float), dt_phi)
        if want_aux:
            aux["dt_k"] = dt_k
            aux["dt_f"] = dt_f
            aux["dt_phi"] = dt_phi
            return dot, aux
        return dot

    def blocks(self, state, aux=None):
        """Pointwise SystemBlocks over the whole grid."""
        if aux is None:
            aux = self.prepare(state)
        a0, ai, offsets = assemble_blocks(self.rep, state.g, aux["z"],
                                          aux["v_frame"])
        m = self.n + 1
        nb = m * m
        b = np.zeros(state.g.shape[:-2] + (a0.shape[-1],))
        b[..., 0:nb] = state.k.reshape(state.k.shape[:-2] + (nb,))
        ks = offsets["k"]
        b[..., ks:ks + nb] = aux["k_source"].reshape(
            state.k.shape[:-2] + (nb,))
        b[..., offsets["phi"]:] = realify_vector(aux["b_spinor"])
        return SystemBlocks(a0=a0, ai=ai, b=b, offsets=offsets)

    def gauge_deviation_field(self, state):
        g = state.g
        dg = self.full_first_jet(state)
        bg_gamma = self.background.christoffel(state.t, self.grid)
        return gauge_deviation(g, dg, bg_gamma)


def build_initial_state(system, data: InitialSurfaceData, f_init=None,
                        scal=None, check="strict", check_tol=1e-6):
    """Assemble the t=0 evolution state from surface data.

    The metric gets -lapse^2 and the slice metric on the diagonal, the slots
    get stencil derivatives of that metric (so the discrete gauge deviation
    vanishes identically), k_ij is -2 lapse W_ij, and the k_{0 mu} row is
    solved from E = 0 using the same stencil slots.

    check: "strict" refuses data whose algebraic or Killing residual exceeds
    check_tol, "warn" warns, "off" skips the test.
    """
    if check not in ("strict", "warn", "off"):
        raise ValueError("check must be strict, warn or off")
    if check != "off":
        alg = float(np.max(np.abs(algebraic_residual(system.rep, data.phi))))
        kil = float(np.max(np.abs(killing_residual(data, system.rep,
                                                   system.order))))
        worst = max(alg, kil)
        if worst > check_tol:
            msg = (f"initial data violates constraints: algebraic {alg:.3e},"
                   f" killing {kil:.3e} (tol {check_tol:.1e})")
            if check == "strict":
                raise ValueError(msg)
            warnings.warn(msg)

    grid, order = system.grid, system.order
    n, m = grid.n, grid.n + 1
    shape = grid.shape
    lam = data.lapse

    g = np.zeros(shape + (m, m))
    g[..., 0, 0] = -lam**2
    g[..., 1:, 1:] = data.g_sigma

    dgs = np.stack([deriv1(g, grid, i, order) for i in range(n)], axis=-3)

    k = np.zeros(shape + (m, m))
    w_low = data.w_lowered()
    w_low = 0.5 * (w_low + np.swapaxes(w_low, -1, -2))
    k[..., 1:, 1:] = -2 * lam[..., None, None] * w_low

    ginv_sigma = inverse_metric(data.g_sigma)
    bg_gamma = system.background.christoffel(0.0, grid)
    f_cov = gauge_source(g, bg_gamma)

    # k_{0j} from E_j = 0 with the block-diagonal slice metric; the g_00
    # derivative must come from the stored slots, not from an analytic
    # lapse identity, or E picks up a truncation-order mismatch
    dg_spatial = dgs[..., :, 1:, 1:]
    k0 = lam[..., None]**2 * (
        -f_cov[..., 1:]
        + np.einsum("...il,...ijl->...j", ginv_sigma, dg_spatial)
        - 0.5 * np.einsum("...il,...jil->...j", ginv_sigma, dg_spatial)
        + 0.5 * dgs[..., :, 0, 0] / lam[..., None]**2)
    k[..., 0, 1:] = k0
    k[..., 1:, 0] = k0
    # k_{00} from E_0 = 0
    k[..., 0, 0] = (-2 * lam**2 * f_cov[..., 0]
                    - lam**2 * np.einsum("...ij,...ij->...",
                                         ginv_sigma, k[..., 1:, 1:]))

    if f_init is None:
        f_init = f_on_slice(data, order, scal=scal)
    f_init = np.broadcast_to(np.asarray(f_init, float), shape).copy()

    return State(0.0, g, dgs, k, f_init, np.asarray(data.phi, complex))


# --- principal symbol blocks ----------------------------------------------

def assemble_blocks(rep, g, z, v_frame):
    """A_0 and A_i of the first-order system at each point.

    Layout: [g | dgs slots 1..n | k | f | Re phi, Im phi], metric blocks
    flattened row-major.  Returns (a0, ai, offsets) with a0 of shape
    (..., N, N) and ai of shape (..., n, N, N).  Every block is written
    from one shared symmetric expression, so A = A^T holds to the bit.
    """
    m = g.shape[-1]
    n = m - 1
    dim = rep.dim
    nb = m * m
    nf = (2 + n) * nb
    size = nf + 1 + 2 * dim
    lead = g.shape[:-2]

    ginv = inverse_metric(g)
    v = np.einsum("...ma,...a->...m", z, v_frame)
    eye = np.eye(nb)

    a0 = np.zeros(lead + (size, size))
    ai = np.zeros(lead + (n, size, size))

    def blk(mat, r, c, val):
        mat[..., r * nb:(r + 1) * nb, c * nb:(c + 1) * nb] = val

    blk(a0, 0, 0, eye)
    for i in range(n):
        for j in range(n):
            blk(a0, 1 + i, 1 + j, ginv[..., 1 + i, 1 + j, None, None] * eye)
    blk(a0, 1 + n, 1 + n, -ginv[..., 0, 0, None, None] * eye)
    a0[..., nf, nf] = v[..., 0]

    a0_s = -np.einsum("a,...a,aij->...ij", rep.eps, z[..., 0, :], rep.g0g)
    a0[..., nf + 1:, nf + 1:] = realify_matrix(a0_s)

    for j in range(n):
        aj = ai[..., j, :, :]
        for i in range(n):
            cross = ginv[..., 1 + i, 1 + j, None, None] * eye
            blk(aj, 1 + i, 1 + n, cross)
            blk(aj, 1 + n, 1 + i, cross)
        blk(aj, 1 + n, 1 + n, 2 * ginv[..., 0, 1 + j, None, None] * eye)
        aj[..., nf, nf] = -v[..., 1 + j]
        aj_s = np.einsum("a,...a,aik->...ik", rep.eps, z[..., 1 + j, :],
                         rep.g0g)
        aj[..., nf + 1:, nf + 1:] = realify_matrix(aj_s)

    offsets = {"g": 0, "dgs": nb, "k": (1 + n) * nb, "f": nf, "phi": nf + 1}
    return a0, ai, offsets


def check_symmetric_hyperbolic(rep, g, phi):
    """Symmetry defect of all blocks and the spectrum floor of A_0.

    Returns (max asymmetry over A_0 and all A_i, min eigenvalue of A_0).
    """
    eps = np.concatenate([[-1.0], np.ones(g.shape[-1] - 1)])
    z = frame(g, eps)
    v_frame = dirac_current(rep, phi)
    a0, ai, _ = assemble_blocks(rep, g, z, v_frame)
    asym = max(float(np.max(np.abs(a0 - np.swapaxes(a0, -1, -2)))),
               float(np.max(np.abs(ai - np.swapaxes(ai, -1, -2)))))
    mineig = float(np.min(np.linalg.eigvalsh(a0)))
    return asym, mineig


def _subsample_slices(grid, cap=4096):
    stride = 1
    active = grid.active or (0,)
    while grid.npoints() // stride**len(active) > cap:
        stride *= 2
    return tuple(slice(None, None, stride) if s > 1 else slice(None)
                 for s in grid.shape)


def a0_floor(system, state, cap=4096):
    """Smallest eigenvalue of A_0 over a grid subsample."""
    sl = _subsample_slices(system.grid, cap)
    _, mineig = check_symmetric_hyperbolic(system.rep, state.g[sl],
                                           state.phi[sl])
    return mineig


def cfl_dt(system, state, cfl):
    """Time step from the generalized spectral radius of the blocks,
    evaluated on a subsample of the grid."""
    sl = _subsample_slices(system.grid)
    g = state.g[sl]
    phi = state.phi[sl]
    z = frame(g, system.eps)
    v_frame = dirac_current(system.rep, phi)
    a0, ai, _ = assemble_blocks(system.rep, g, z, v_frame)
    dt = np.inf
    for axis in system.grid.active:
        gen = np.linalg.solve(a0, ai[..., axis, :, :])
        speed = float(np.max(np.abs(np.linalg.eigvals(gen))))
        if speed > 0:
            dt = min(dt, cfl * system.grid.spacing[axis] / speed)
    if not np.isfinite(dt):
        spacings = [system.grid.spacing[a] for a in system.grid.active]
        dt = cfl * min(spacings) if spacings else cfl
    return dt


def step_rk4(system, state, dt):
    y0 = state.pack()
    t0 = state.t

    def f(t, y):
        s = State.unpack(y, state)
        s.t = t
        return system.rhs(s).pack()

    k1 = f(t0, y0)
    k2 = f(t0 + dt / 2, y0 + dt / 2 * k1)
    k3 = f(t0 + dt / 2, y0 + dt / 2 * k2)
    k4 = f(t0 + dt, y0 + dt * k3)
    out = State.unpack(y0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), state)
    out.t = t0 + dt
    return out


@dataclass
class EvolutionConfig:
    t_end: float = 1.0
    cfl: float = 0.25
    dt: float = 0.0            # explicit step; 0 means derive from cfl
    monitor_every: int = 1     # 0: monitor only first and last slice
    slice_every: int = 0       # checkpoint cadence in steps; 0 = ends only
    history_len: int = 6
    max_gauge: float = np.inf  # halt when sup |E| exceeds this
    min_eig: float = 1e-10     # halt when the A_0 floor drops below this

    def __post_init__(self):
        if self.dt < 0 or not (0 < self.cfl <= 1):
            raise ValueError("dt must be >= 0 and cfl in (0, 1]")


@dataclass
class EvolutionResult:
    state: State
    steps: int
    dt: float
    rows: list = field(default_factory=list)
    halt: str = "completed"
    min_a0_eig: float = np.inf
    history: object = None


def evolve(system, state, config, monitor=None, slice_cb=None):
    """March the state to t_end with fixed-step RK4.

    monitor(system, state, history) is called at the configured cadence and
    its dict rows are collected; slice_cb(state, step) receives checkpoint
    slices.  history holds (t, state) pairs for the most recent slices.
    Halts early on frame breakdown, non-finite values, loss of the A_0
    eigenvalue floor or gauge deviation beyond config.max_gauge; the halt
    string names the failed invariant.
    """
    dt = config.dt if config.dt > 0 else cfl_dt(system, state, config.cfl)
    history = deque(maxlen=max(config.history_len, 2))
    history.append((state.t, state.copy()))
    rows = []
    halt = "completed"
    floor = np.inf

    def checks(st):
        nonlocal floor, halt
        eig = a0_floor(system, st)
        floor = min(floor, eig)
        if eig < config.min_eig:
            halt = f"A0 eigenvalue floor {eig:.3e} below {config.min_eig:.1e}"
            return False
        if np.isfinite(config.max_gauge):
            e_sup = float(np.max(np.abs(system.gauge_deviation_field(st))))
            if e_sup > config.max_gauge:
                halt = f"gauge deviation {e_sup:.3e} over limit"
                return False
        return True

    if monitor is not None:
        rows.append(monitor(system, state, history))
    if slice_cb is not None:
        slice_cb(state, 0)
    if not checks(state):
        return EvolutionResult(state=state, steps=0, dt=dt, rows=rows,
                               halt=halt, min_a0_eig=floor, history=history)

    step = 0
    while state.t < config.t_end - 1e-12 * max(dt, 1.0):
        h = min(dt, config.t_end - state.t)
        try:
            state = step_rk4(system, state, h)
        except FrameError as err:
            halt = f"frame: {err}"
            break
        except np.linalg.LinAlgError as err:
            halt = f"singular spinor block: {err}"
            break
        step += 1
        if not np.all(np.isfinite(state.pack())):
            halt = "non-finite state"
            break
        history.append((state.t, state.copy()))
        at_end = state.t >= config.t_end - 1e-12 * max(dt, 1.0)
        due = config.monitor_every and step % config.monitor_every == 0
        if monitor is not None and (due or at_end):
            rows.append(monitor(system, state, history))
        if due or at_end:
            if not checks(state):
                break
        if slice_cb is not None and config.slice_every \
                and step % config.slice_every == 0 and not at_end:
            slice_cb(state, step)

    if slice_cb is not None:
        slice_cb(state, step)
    return EvolutionResult(state=state, steps=step, dt=dt, rows=rows,
                           halt=halt, min_a0_eig=floor, history=history)
