"""Grids, stencils, metric jet algebra, frames and analytic backgrounds.

Array conventions:

* grid axes lead, tensor axes trail: a metric field has shape
  (*grid.shape, n+1, n+1), a spinor field (*grid.shape, dim).
* derivative indices come first among the tensor axes:
  dg[..., lam, mu, nu] = d_lam g_{mu nu},
  ddg[..., k, l, mu, nu] = d_k d_l g_{mu nu}.
* index 0 is time; spatial coordinate axes 1..n map to grid axes 0..n-1.
* frames are stored as Z[..., mu, a]: column a holds the coordinate
  components of the frame vector s_a.

All metric operations are pointwise jet algebra; the caller supplies the
derivative arrays (stencil-based, state-stored, or analytic).
"""

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

__all__ = [
    "Grid",
    "FrameError",
    "deriv1",
    "deriv2",
    "inverse_metric",
    "christoffel",
    "dchristoffel",
    "ricci_from_jet",
    "contracted_covector",
    "d_contracted_covector",
    "gauge_source",
    "d_gauge_source",
    "gauge_deviation",
    "d_gauge_deviation",
    "quad_term",
    "sym_cov_grad",
    "reduced_ricci",
    "frame",
    "frame_derivative",
    "spin_coefficients",
    "spin_connection",
    "BackgroundMetric",
]


class FrameError(RuntimeError):
    """Orthonormalization failed: the metric lost its Lorentzian signature."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid.  Axes with a single point are inactive."""

    shape: tuple
    lengths: tuple

    def __post_init__(self):
        if len(self.shape) != len(self.lengths):
            raise ValueError("shape and lengths must have equal rank")
        if any(s < 1 for s in self.shape):
            raise ValueError("grid axes need at least one point")

    @property
    def n(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(l / s for l, s in zip(self.lengths, self.shape))

    @property
    def active(self):
        return tuple(i for i, s in enumerate(self.shape) if s > 1)

    def coords(self):
        axes = [np.arange(s) * d for s, d in zip(self.shape, self.spacing)]
        return np.meshgrid(*axes, indexing="ij")

    def npoints(self):
        return int(np.prod(self.shape))


def deriv1(f, grid, axis, order):
    """Periodic centered first derivative along spatial grid axis."""
    if grid.shape[axis] == 1:
        return np.zeros_like(f)
    h = grid.spacing[axis]
    if order == 2:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)
    if order == 4:
        if grid.shape[axis] < 5:
            raise ValueError("order-4 stencil needs at least 5 points")
        return (-np.roll(f, -2, axis=axis) + 8 * np.roll(f, -1, axis=axis)
                - 8 * np.roll(f, 1, axis=axis) + np.roll(f, 2, axis=axis)) / (12 * h)
    raise ValueError(f"unsupported stencil order {order}")


def deriv2(f, grid, axis, order):
    """Periodic centered second derivative along one spatial grid axis."""
    if grid.shape[axis] == 1:
        return np.zeros_like(f)
    h = grid.spacing[axis]
    if order == 2:
        return (np.roll(f, -1, axis=axis) - 2 * f + np.roll(f, 1, axis=axis)) / h**2
    if order == 4:
        return (-np.roll(f, -2, axis=axis) + 16 * np.roll(f, -1, axis=axis) - 30 * f
                + 16 * np.roll(f, 1, axis=axis) - np.roll(f, 2, axis=axis)) / (12 * h**2)
    raise ValueError(f"unsupported stencil order {order}")


def inverse_metric(g):
    """Batched inverse, explicitly resymmetrized so blocks built from it
    are symmetric to the bit."""
    ginv = np.linalg.inv(g)
    return 0.5 * (ginv + np.swapaxes(ginv, -1, -2))


def christoffel(g, dg, ginv=None):
    """Gamma^mu_{ab} from the metric and its first derivatives."""
    if ginv is None:
        ginv = inverse_metric(g)
    low = 0.5 * (np.einsum("...alb->...lab", dg) + np.einsum("...bla->...lab", dg) - dg)
    return np.einsum("...ml,...lab->...mab", ginv, low)


def dchristoffel(g, dg, ddg, ginv=None):
    """d_k Gamma^mu_{ab}, shape (..., k, mu, a, b)."""
    if ginv is None:
        ginv = inverse_metric(g)
    dginv = -np.einsum("...ma,...kab,...bn->...kmn", ginv, dg, ginv)
    low = 0.5 * (np.einsum("...alb->...lab", dg) + np.einsum("...bla->...lab", dg) - dg)
    dlow = 0.5 * (np.einsum("...kalb->...klab", ddg)
                  + np.einsum("...kbla->...klab", ddg) - ddg)
    return (np.einsum("...kml,...lab->...kmab", dginv, low)
            + np.einsum("...ml,...klab->...kmab", ginv, dlow))


def ricci_from_jet(g, dg, ddg):
    """Ricci tensor from the 2-jet of the metric (textbook formula)."""
    ginv = inverse_metric(g)
    gam = christoffel(g, dg, ginv)
    dgam = dchristoffel(g, dg, ddg, ginv)
    return (np.einsum("...aamn->...mn", dgam) - np.einsum("...maan->...mn", dgam)
            + np.einsum("...aab,...bmn->...mn", gam, gam)
            - np.einsum("...amb,...ban->...mn", gam, gam))


def contracted_covector(g, dg, ginv=None):
    """g_{nl} g^{ab} Gamma^l_{ab} expressed directly in first derivatives."""
    if ginv is None:
        ginv = inverse_metric(g)
    return (np.einsum("...ab,...anb->...n", ginv, dg)
            - 0.5 * np.einsum("...ab,...nab->...n", ginv, dg))


def d_contracted_covector(g, dg, ddg, ginv=None):
    """Coordinate derivative d_k of contracted_covector."""
    if ginv is None:
        ginv = inverse_metric(g)
    dginv = -np.einsum("...ma,...kab,...bn->...kmn", ginv, dg, ginv)
    return (np.einsum("...kab,...anb->...kn", dginv, dg)
            + np.einsum("...ab,...kanb->...kn", ginv, ddg)
            - 0.5 * np.einsum("...kab,...nab->...kn", dginv, dg)
            - 0.5 * np.einsum("...ab,...knab->...kn", ginv, ddg))


def gauge_source(g, bg_gamma, ginv=None):
    """Covector F_n = g_{mn} g^{ab} GammaBG^m_{ab} from background Christoffels."""
    if ginv is None:
        ginv = inverse_metric(g)
    return np.einsum("...mn,...ab,...mab->...n", g, ginv, bg_gamma)


def d_gauge_source(g, dg, bg_gamma, bg_dgamma, ginv=None):
    """Coordinate derivative d_k F_n; background derivatives are analytic."""
    if ginv is None:
        ginv = inverse_metric(g)
    dginv = -np.einsum("...ma,...kab,...bn->...kmn", ginv, dg, ginv)
    return (np.einsum("...kmn,...ab,...mab->...kn", dg, ginv, bg_gamma)
            + np.einsum("...mn,...kab,...mab->...kn", g, dginv, bg_gamma)
            + np.einsum("...mn,...ab,...kmab->...kn", g, ginv, bg_dgamma))


def gauge_deviation(g, dg, bg_gamma, ginv=None):
    """E_n = -g_{mn} g^{ab} (Gamma - GammaBG)^m_{ab}; vanishes in the gauge
    the evolution preserves."""
    if ginv is None:
        ginv = inverse_metric(g)
    return gauge_source(g, bg_gamma, ginv) - contracted_covector(g, dg, ginv)


def d_gauge_deviation(g, dg, ddg, bg_gamma, bg_dgamma, ginv=None):
    if ginv is None:
        ginv = inverse_metric(g)
    return (d_gauge_source(g, dg, bg_gamma, bg_dgamma, ginv)
            - d_contracted_covector(g, dg, ddg, ginv))


def quad_term(g, dg, ginv=None, gam=None):
    """Quadratic Christoffel term of the reduced Ricci tensor.

    Uses lowered symbols L[a,c,m] = g_{cl} Gamma^l_{am}.
    """
    if ginv is None:
        ginv = inverse_metric(g)
    if gam is None:
        gam = christoffel(g, dg, ginv)
    low = np.einsum("...cl,...lam->...acm", g, gam)
    up = np.einsum("...ab,...acm->...bcm", ginv, low)
    t1 = np.einsum("...bcm,...cd,...bdn->...mn", up, ginv, low)
    t2 = np.einsum("...bcm,...cd,...bnd->...mn", up, ginv, low)
    t3 = np.einsum("...bcn,...cd,...bmd->...mn", up, ginv, low)
    return t1 + t2 + t3


def sym_cov_grad(g, dg, cov, dcov, gam=None):
    """Symmetrized covariant gradient of a covector: nabla_(m X_n)."""
    if gam is None:
        gam = christoffel(g, dg)
    grad = dcov - np.einsum("...lmn,...l->...mn", gam, cov)
    return 0.5 * (grad + np.swapaxes(grad, -1, -2))


def reduced_ricci(g, dg, ddg, bg_gamma, bg_dgamma):
    """Reduced Ricci tensor: -1/2 g^{ab} dd g + nabla_(m F_n) + quadratic term.

    Equals Ricci plus the symmetrized covariant gradient of the gauge
    deviation covector.
    """
    ginv = inverse_metric(g)
    gam = christoffel(g, dg, ginv)
    f_cov = gauge_source(g, bg_gamma, ginv)
    df_cov = d_gauge_source(g, dg, bg_gamma, bg_dgamma, ginv)
    box = -0.5 * np.einsum("...ab,...abmn->...mn", ginv, ddg)
    return box + sym_cov_grad(g, dg, f_cov, df_cov, gam) + quad_term(g, dg, ginv, gam)


# --- frames ---------------------------------------------------------------

def frame(g, eps, min_norm=1e-13):
    """Pseudo-orthonormal frame by Gram-Schmidt on the coordinate basis.

    Returns Z[..., mu, a] upper triangular in (mu, a) with positive diagonal,
    satisfying Z^T g Z = diag(eps).  Raises FrameError when a squared norm
    crosses zero (signature breakdown).
    """
    m = g.shape[-1]
    zt = np.zeros_like(g)
    cols = []
    for a in range(m):
        w = np.zeros(g.shape[:-1])
        w[..., a] = 1.0
        for b in range(a):
            sb = cols[b]
            coef = eps[b] * np.einsum("...mn,...m,...n->...", g, w, sb)
            w = w - coef[..., None] * sb
        q = eps[a] * np.einsum("...mn,...m,...n->...", g, w, w)
        if np.any(q <= min_norm):
            bad = np.unravel_index(int(np.argmin(q)), q.shape) if q.ndim \
                else ()
            raise FrameError(f"frame vector {a}: signed norm dropped to "
                             f"{float(np.min(q)):.3e} at grid index {bad}")
        w = w / np.sqrt(q)[..., None]
        cols.append(w)
        zt[..., a, :] = w
    return np.swapaxes(zt, -1, -2)


def frame_derivative(z, dg, eps):
    """Directional derivatives of the Gram-Schmidt frame.

    dg carries any number of derivative directions in its first tensor axis;
    the result has matching shape (..., k, mu, a).  Uses the closed form
    implied by Z^T g Z = const together with triangularity of Z.
    """
    m_mat = np.einsum("...ma,...kmn,...nb->...kab", z, dg, z)
    y = -np.triu(m_mat, 1)
    idx = np.arange(z.shape[-1])
    y[..., idx, idx] = -0.5 * m_mat[..., idx, idx]
    x = eps[:, None] * y
    return np.einsum("...ma,...kab->...kmb", z, x)


# --- spin connection ------------------------------------------------------

def spin_coefficients(g, gam, z, dz):
    """Connection coefficients g(nabla_{s_a} s_b, s_c), shape (..., a, b, c)."""
    t1 = np.einsum("...ma,...mnb,...ns,...sc->...abc", z, dz, g, z)
    t2 = np.einsum("...ma,...lb,...nml,...ns,...sc->...abc", z, z, gam, g, z)
    return t1 + t2


def spin_connection(coeffs, gammas, eps):
    """Connection endomorphisms omega(s_a) = 1/4 sum eps_b eps_c coeff_abc
    gamma_b gamma_c.  Skew-adjoint for the invariant spinor product.

    gammas: (m, dim, dim); works for the Lorentzian frame and equally for a
    Riemannian slice frame with eps = +1.
    """
    prod = np.einsum("bij,cjk->bcik", gammas, gammas)
    return 0.25 * np.einsum("b,c,...abc,bcik->...aik", eps, eps, coeffs, prod)


# --- analytic background --------------------------------------------------

class BackgroundMetric:
    """Analytic Lorentzian metric given as a sympy matrix in (t, x_1..x_n).

    Provides the metric, its Christoffels and their coordinate derivatives
    evaluated on a grid at a given time.  The initial slice must carry no
    shift, so that the t=0 restriction has the product form the initial data
    construction assumes.
    """

    def __init__(self, n, exprs, t_sym, x_syms):
        m = n + 1
        h = sp.Matrix(exprs)
        if h.shape != (m, m):
            raise ValueError(f"background must be {m}x{m}")
        if sp.simplify(h - h.T) != sp.zeros(m, m):
            raise ValueError("background metric must be symmetric")
        for i in range(1, m):
            if sp.simplify(h[0, i].subs(t_sym, 0)) != 0:
                raise ValueError("background must be shift-free on the "
                                 "initial slice")
        self.n = n
        self._syms = (t_sym,) + tuple(x_syms)
        self._h = h
        self._f0 = {}
        self._f1 = {}
        self._f2 = {}
        for i in range(m):
            for j in range(i, m):
                self._f0[(i, j)] = sp.lambdify(self._syms, h[i, j], "numpy")
        for k in range(m):
            dh = h.diff(self._syms[k])
            for i in range(m):
                for j in range(i, m):
                    self._f1[(k, i, j)] = sp.lambdify(self._syms, dh[i, j], "numpy")
            for l in range(k, m):
                ddh = dh.diff(self._syms[l])
                for i in range(m):
                    for j in range(i, m):
                        self._f2[(k, l, i, j)] = sp.lambdify(
                            self._syms, ddh[i, j], "numpy")
        self._cache = {}

    @classmethod
    def minkowski(cls, n, lapse=1.0):
        t = sp.Symbol("t", real=True)
        xs = sp.symbols(f"x1:{n + 1}", real=True)
        h = sp.diag(-sp.Float(lapse) ** 2, *([1] * n))
        return cls(n, h, t, xs)

    def _args(self, t, grid):
        return (float(t),) + tuple(grid.coords())

    def _fill(self, t, grid):
        key = (float(t), grid.shape, grid.lengths)
        if key in self._cache:
            return self._cache[key]
        m = self.n + 1
        args = self._args(t, grid)
        shape = grid.shape

        def ev(fn):
            return np.broadcast_to(np.asarray(fn(*args), float), shape)

        h = np.empty(shape + (m, m))
        dh = np.empty(shape + (m, m, m))
        ddh = np.empty(shape + (m, m, m, m))
        for (i, j), fn in self._f0.items():
            v = ev(fn)
            h[..., i, j] = v
            h[..., j, i] = v
        for (k, i, j), fn in self._f1.items():
            v = ev(fn)
            dh[..., k, i, j] = v
            dh[..., k, j, i] = v
        for (k, l, i, j), fn in self._f2.items():
            v = ev(fn)
            ddh[..., k, l, i, j] = v
            ddh[..., k, l, j, i] = v
            if l != k:
                ddh[..., l, k, i, j] = v
                ddh[..., l, k, j, i] = v
        gam = christoffel(h, dh)
        dgam = dchristoffel(h, dh, ddh)
        out = {"h": h, "dh": dh, "ddh": ddh, "gamma": gam, "dgamma": dgam}
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = out
        return out

    def metric(self, t, grid):
        return self._fill(t, grid)["h"]

    def dmetric(self, t, grid):
        return self._fill(t, grid)["dh"]

    def christoffel(self, t, grid):
        return self._fill(t, grid)["gamma"]

    def dchristoffel(self, t, grid):
        return self._fill(t, grid)["dgamma"]

    def lapse_sigma(self, grid):
        h00 = self.metric(0.0, grid)[..., 0, 0]
        if np.any(h00 >= 0):
            raise ValueError("background time direction is not timelike")
        return np.sqrt(-h00)

    def slice_metric(self, t, grid):
        return self.metric(t, grid)[..., 1:, 1:]
