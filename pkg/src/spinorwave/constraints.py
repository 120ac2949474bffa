"""Initial-surface data and its compatibility checks.

The initial slice carries a Riemannian metric, a symmetric second fundamental
form candidate W (mixed indices), a spinor field phi and a lapse.  Admissible
data satisfies, pointwise or to stencil accuracy:

* algebraic constraint: the slice Dirac current of phi acts on phi as
  i |phi|^2 (phi lies in the +1 eigenspace of the normalized current action);
* generalized Killing equation: nabla_X phi = (i/2) W(X) . phi with the slice
  Clifford action;
* momentum identity: d(tr W) + div-type divergence of W equals
  f_slice * |phi|^2 * U-flat, with f_slice fixed by the slice scalar
  curvature and the invariants of W.

Spinor components are always taken in the Gram-Schmidt frame of the slice
metric, so the pointwise Clifford algebra is flat and curvature enters only
through the spin connection.
"""

from dataclasses import dataclass

import numpy as np

from .clifford import GammaRep
from .geometry import (Grid, deriv1, deriv2, frame, frame_derivative,
                       christoffel, inverse_metric, ricci_from_jet,
                       spin_coefficients, spin_connection)

__all__ = [
    "gamma_tilde",
    "riemannian_current",
    "algebraic_residual",
    "project_null_spinor",
    "spatial_jets",
    "InitialSurfaceData",
    "slice_frame",
    "killing_residual",
    "f_on_slice",
    "momentum_residual",
    "codazzi_residual",
    "codazzi_symmetry_defect",
    "ConstraintReport",
    "check_initial_data",
]


def gamma_tilde(rep: GammaRep):
    """Slice Clifford generators i*gamma_0*gamma_a, a = 1..n.

    They are anti-Hermitian with square -1 and anticommute, the standard
    Riemannian convention.
    """
    return 1j * rep.g0g[1:]


def riemannian_current(rep, phi):
    """Frame components of the slice Dirac current, shape (..., n), real.

    U^a = phi^dag (gamma_0 gamma_a) phi; the matrices are Hermitian so the
    imaginary part is round-off and is dropped.
    """
    return np.einsum("aij,...j,...i->...a", rep.g0g[1:], phi,
                     np.conj(phi)).real


def algebraic_residual(rep, phi):
    """U . phi - i |phi|^2 phi with the slice Clifford action."""
    u = riemannian_current(rep, phi)
    gt = gamma_tilde(rep)
    act = np.einsum("...a,aij,...j->...i", u, gt, phi)
    uphi = np.einsum("...i,...i->...", phi, np.conj(phi)).real
    return act - 1j * uphi[..., None] * phi


def project_null_spinor(rep, phi, tol=1e-12, maxit=100):
    """Project onto the +1 eigenspace of the normalized current action.

    Iterates phi <- 1/2 (phi - i U.phi / |U|) until the algebraic residual
    is below tol relative to |phi|^2.  The projection changes the current,
    hence the iteration; it converges fast away from the zero section.
    """
    gt = gamma_tilde(rep)
    phi = np.asarray(phi, complex)
    for _ in range(maxit):
        u = riemannian_current(rep, phi)
        umag = np.sqrt(np.einsum("...a,...a->...", u, u))
        if np.any(umag < 1e-14):
            raise ValueError("current vanished during projection")
        act = np.einsum("...a,aij,...j->...i", u, gt, phi)
        phi = 0.5 * (phi - 1j * act / umag[..., None])
        res = algebraic_residual(rep, phi)
        uphi = np.einsum("...i,...i->...", phi, np.conj(phi)).real
        if np.any(uphi < 1e-14):
            raise ValueError("spinor collapsed to zero during projection")
        rel = np.max(np.abs(res)) / np.max(uphi)
        if rel < tol:
            return phi
    raise ValueError(f"projection did not reach tol={tol} in {maxit} steps")


def spatial_jets(f, grid, order):
    """First and second stencil derivatives along all grid axes.

    Returns (d1, d2) with the derivative axes inserted first among the
    tensor axes; d2 is exactly symmetric (mixed derivatives by composition,
    pure ones by the dedicated second-derivative stencil).
    """
    n = grid.n
    tshape = f.shape[len(grid.shape):]
    d1 = np.zeros(grid.shape + (n,) + tshape, dtype=f.dtype)
    d2 = np.zeros(grid.shape + (n, n) + tshape, dtype=f.dtype)
    for i in range(n):
        d1[(..., i) + (slice(None),) * len(tshape)] = deriv1(f, grid, i, order)
    for i in range(n):
        di = d1[(..., i) + (slice(None),) * len(tshape)]
        for j in range(i, n):
            if i == j:
                v = deriv2(f, grid, i, order)
            else:
                v = deriv1(di, grid, j, order)
            d2[(..., i, j) + (slice(None),) * len(tshape)] = v
            d2[(..., j, i) + (slice(None),) * len(tshape)] = v
    return d1, d2


@dataclass
class InitialSurfaceData:
    """Riemannian slice data: metric, Weingarten candidate, spinor, lapse.

    g_sigma : (*grid.shape, n, n) positive definite
    w_mixed : (*grid.shape, n, n) candidate W^i_j; W lowered with g_sigma
              must be symmetric
    phi     : (*grid.shape, dim) complex spinor in the slice frame
    lapse   : scalar or (*grid.shape) positive field
    """

    grid: Grid
    g_sigma: np.ndarray
    w_mixed: np.ndarray
    phi: np.ndarray
    lapse: np.ndarray = 1.0

    def __post_init__(self):
        n = self.grid.n
        shape = self.grid.shape
        self.g_sigma = np.asarray(self.g_sigma, float)
        self.w_mixed = np.asarray(self.w_mixed, float)
        self.phi = np.asarray(self.phi, complex)
        if self.g_sigma.shape != shape + (n, n):
            raise ValueError("g_sigma has wrong shape")
        if self.w_mixed.shape != shape + (n, n):
            raise ValueError("w_mixed has wrong shape")
        if self.phi.shape[:-1] != shape:
            raise ValueError("phi has wrong grid shape")
        self.lapse = np.broadcast_to(np.asarray(self.lapse, float),
                                     shape).copy()
        if np.any(self.lapse <= 0):
            raise ValueError("lapse must be positive")
        sym = np.max(np.abs(self.g_sigma - np.swapaxes(self.g_sigma, -1, -2)))
        if sym > 1e-12:
            raise ValueError(f"g_sigma asymmetric by {sym:.3e}")
        eig = np.linalg.eigvalsh(self.g_sigma)
        if np.any(eig <= 0):
            raise ValueError("g_sigma is not positive definite")

    @property
    def u_phi(self):
        return np.einsum("...i,...i->...", self.phi, np.conj(self.phi)).real

    def w_lowered(self):
        return np.einsum("...ik,...kj->...ij", self.g_sigma, self.w_mixed)

    def w_symmetry_defect(self):
        wl = self.w_lowered()
        return float(np.max(np.abs(wl - np.swapaxes(wl, -1, -2))))


def slice_frame(g_sigma):
    return frame(g_sigma, np.ones(g_sigma.shape[-1]))


def _slice_connection(data, rep, order):
    """Frame, coframe, spin connection and Christoffels of the slice."""
    g = data.g_sigma
    dg, _ = spatial_jets(g, data.grid, order)
    eps = np.ones(data.grid.n)
    z = frame(g, eps)
    dz = frame_derivative(z, dg, eps)
    gam = christoffel(g, dg)
    coeffs = spin_coefficients(g, gam, z, dz)
    omega = spin_connection(coeffs, gamma_tilde(rep), eps)
    # coframe theta[..., a, i] = theta^a_i with theta^a_i z^i_b = delta^a_b
    theta = np.einsum("...ma,...mi->...ai", z, g)
    return z, theta, gam, omega, dg


def killing_residual(data, rep, order=4):
    """nabla_{e_a} phi - (i/2) W(e_a) . phi in the slice frame.

    Shape (*grid.shape, n, dim).  Zero (to stencil accuracy) exactly for
    generalized-Killing data.
    """
    z, theta, gam, omega, dg = _slice_connection(data, rep, order)
    dphi, _ = spatial_jets(data.phi, data.grid, order)
    grad = (np.einsum("...ia,...ik->...ak", z, dphi)
            + np.einsum("...aij,...j->...ai", omega, data.phi))
    wf = np.einsum("...bi,...ij,...ja->...ba", theta, data.w_mixed, z)
    gt = gamma_tilde(rep)
    act = np.einsum("...ba,bij,...j->...ai", wf, gt, data.phi)
    return grad - 0.5j * act


def f_on_slice(data, order=4, scal=None):
    """Scalar source on the slice fixed by the Hamiltonian-type identity:

        f = (scal_sigma - tr(W^2) + (tr W)^2) / (2 |phi|^4)
    """
    if scal is None:
        g = data.g_sigma
        dg, ddg = spatial_jets(g, data.grid, order)
        ric = ricci_from_jet(g, dg, ddg)
        scal = np.einsum("...ij,...ij->...", inverse_metric(g), ric)
    w = data.w_mixed
    tr_w = np.einsum("...ii->...", w)
    tr_w2 = np.einsum("...ij,...ji->...", w, w)
    return (scal - tr_w2 + tr_w**2) / (2 * data.u_phi**2)


def _div_and_dtr(data, order):
    """(d trW)_c and the negative-trace divergence (div W)_c."""
    g = data.g_sigma
    grid = data.grid
    dg, _ = spatial_jets(g, grid, order)
    ginv = inverse_metric(g)
    gam = christoffel(g, dg, ginv)
    wl = data.w_lowered()
    dwl, _ = spatial_jets(wl, grid, order)
    nabla = (dwl - np.einsum("...lab,...lc->...abc", gam, wl)
             - np.einsum("...lac,...bl->...abc", gam, wl))
    div = -np.einsum("...ab,...abc->...c", ginv, nabla)
    tr_w = np.einsum("...ii->...", data.w_mixed)
    dtr, _ = spatial_jets(tr_w, grid, order)
    return dtr, div, nabla


def codazzi_residual(data, order=4):
    """(d trW + div W)_c: vanishes iff the development is Ricci-flat."""
    dtr, div, _ = _div_and_dtr(data, order)
    return dtr + div


def momentum_residual(data, rep, order=4, scal=None):
    """(d trW + div W) - f |phi|^2 U-flat; must vanish for admissible data."""
    dtr, div, _ = _div_and_dtr(data, order)
    f = f_on_slice(data, order, scal=scal)
    u = riemannian_current(rep, data.phi)
    z = slice_frame(data.g_sigma)
    theta = np.einsum("...ma,...mi->...ai", z, data.g_sigma)
    u_flat = np.einsum("...a,...ai->...i", u, theta)
    return dtr + div - (f * data.u_phi)[..., None] * u_flat


def codazzi_symmetry_defect(data, order=4):
    """sup |(nabla_a W)_{bc} - (nabla_b W)_{ac}|: full Codazzi symmetry,
    strictly stronger than the vanishing of its trace."""
    _, _, nabla = _div_and_dtr(data, order)
    return float(np.max(np.abs(nabla - np.swapaxes(nabla, -3, -2))))


@dataclass
class ConstraintReport:
    algebraic: float
    killing: float
    momentum: float
    codazzi: float
    w_symmetry: float
    f_min: float
    f_max: float
    u_min: float

    def rows(self):
        return [
            ("algebraic_constraint", self.algebraic),
            ("killing_equation", self.killing),
            ("momentum_identity", self.momentum),
            ("codazzi_trace", self.codazzi),
            ("w_symmetry", self.w_symmetry),
            ("f_min", self.f_min),
            ("f_max", self.f_max),
            ("u_phi_min", self.u_min),
        ]

    def admissible(self, tol):
        return max(self.algebraic, self.killing, self.momentum,
                   self.w_symmetry) <= tol


def check_initial_data(data, rep, order=4, scal=None):
    """Evaluate every compatibility residual in sup norm."""
    f = f_on_slice(data, order, scal=scal)
    return ConstraintReport(
        algebraic=float(np.max(np.abs(algebraic_residual(rep, data.phi)))),
        killing=float(np.max(np.abs(killing_residual(data, rep, order)))),
        momentum=float(np.max(np.abs(momentum_residual(data, rep, order,
                                                       scal=scal)))),
        codazzi=float(np.max(np.abs(codazzi_residual(data, order)))),
        w_symmetry=data.w_symmetry_defect(),
        f_min=float(np.min(f)),
        f_max=float(np.max(f)),
        u_min=float(np.min(data.u_phi)),
    )
