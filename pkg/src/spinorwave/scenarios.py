"""Bundled scenarios: exact or constructed initial data with declared
check tolerances and, where available, exact solutions for error
measurement.

minkowski    flat slice, W = 0, constant null spinor; the evolution is an
             exact fixed point of the discrete right-hand side.
warped       flat 3-torus slice whose spinor is scaled by a periodic factor
             exp(a cos), with W = -2 d(ln scale) x d_s.  The data satisfies
             the generalized Killing equation exactly, the divergence
             criterion holds, f vanishes on the slice, and the development
             is Ricci-flat.
pp_wave      plane-wave metric 2 du dv + H(x) du^2 + dx^2 in a sheared
             slicing with zero shift for all t; fully explicit nonflat
             solution with f = -H''/(2 kappa^2) != 0, used as the
             convergence oracle.

All scenarios are periodic and deterministic: identical parameters give
bit-identical data.
"""

import math
from dataclasses import dataclass

import numpy as np
import sympy as sp

from .clifford import build_gamma, canonical_null_spinor
from .constraints import InitialSurfaceData
from .evolution import System
from .geometry import BackgroundMetric, Grid

__all__ = [
    "Scenario",
    "SCENARIOS",
    "get_scenario",
    "warped_negative_control",
]

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Scenario:
    """Named initial-data generator with declared thresholds."""

    name: str
    n: int
    description: str
    check_tol: float
    default_resolution: int
    defaults: dict
    _build: callable

    def build(self, resolution=None, order=4, **params):
        """Returns (system, data, extras); extras may carry exact fields."""
        if resolution is None:
            resolution = self.default_resolution
        kw = dict(self.defaults)
        kw.update(params)
        return self._build(resolution, order, **kw)


def _build_minkowski(resolution, order, n=2, lapse=1.0, length=TWO_PI):
    grid = Grid((resolution,) * n, (length,) * n)
    bg = BackgroundMetric.minkowski(n, lapse)
    system = System(grid, bg, order)
    shape = grid.shape
    g_sigma = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
    w = np.zeros(shape + (n, n))
    rep = build_gamma(n)
    phi = np.broadcast_to(canonical_null_spinor(rep),
                          shape + (rep.dim,)).copy()
    data = InitialSurfaceData(grid, g_sigma, w, phi, float(lapse))
    extras = {"f_init": np.zeros(shape), "t_end_crossing": length}
    return system, data, extras


def _build_warped(resolution, order, n=3, amp=0.15, length=TWO_PI):
    """Flat torus slice, spinor scaled along the first axis.

    scale(s) = exp(amp cos(2 pi s / length)) and W = -2 (ln scale)' ds x d_s
    satisfy the Killing equation exactly; tr W and the divergence of W
    cancel, so the divergence criterion holds and the development must be
    Ricci-flat.
    """
    shape = (resolution,) + (1,) * (n - 1)
    grid = Grid(shape, (length,) * n)
    bg = BackgroundMetric.minkowski(n, 1.0)
    system = System(grid, bg, order)
    s = grid.coords()[0]
    freq = TWO_PI / length
    scale = np.exp(amp * np.cos(freq * s))
    w_profile = 2 * amp * freq * np.sin(freq * s)   # -2 (ln scale)'
    g_sigma = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
    w = np.zeros(shape + (n, n))
    w[..., 0, 0] = w_profile
    rep = build_gamma(n)
    phi = scale[..., None] * canonical_null_spinor(rep)
    data = InitialSurfaceData(grid, g_sigma, w, phi, 1.0)
    extras = {
        "f_init": np.zeros(shape),
        "w_profile": w_profile,
        "codazzi_exact": 0.0,
        "t_end_crossing": length,
    }
    return system, data, extras


def warped_negative_control(resolution, order=4, n=3, b0=0.3,
                            length=TWO_PI):
    """W = b(s) Id with nonconstant b and an unmodified constant spinor.

    The divergence criterion fails: d(tr W) + div W = (n-1) db, with sup
    norm (n-1) b0 pi / length bounded away from zero.  Returned as
    (data, exact_residual_sup).
    """
    shape = (resolution,) + (1,) * (n - 1)
    grid = Grid(shape, (length,) * n)
    s = grid.coords()[0]
    freq = TWO_PI / length
    b = b0 * (1 + 0.5 * np.sin(freq * s))
    g_sigma = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
    w = b[..., None, None] * np.eye(n)
    rep = build_gamma(n)
    phi = np.broadcast_to(canonical_null_spinor(rep),
                          shape + (rep.dim,)).copy()
    data = InitialSurfaceData(grid, g_sigma, w, phi, 1.0)
    exact_sup = (n - 1) * b0 * 0.5 * freq
    return data, exact_sup


def _build_pp_wave(resolution, order, amp=0.05, kappa=math.sqrt(2.0),
                   length=TWO_PI):
    """Plane wave 2 du dv + H(x) du^2 + dx^2, H = amp cos(2 pi x / length).

    In coordinates (t, y, x) with u = (y_orig - t)/sqrt(2) and a t-dependent
    shear of y_orig chosen so the shift vanishes for all t, the metric is

        g_tt = -1/q,  g_yy = q,  g_yx = t s' q,  g_xx = 1 + q (t s')^2,

    with q = 1 + H/2 and s = 1 - 1/q.  The slice data, the parallel spinor
    phi = (kappa/sqrt 2)^(1/2) q^(-1/4) chi with gamma_0 gamma_1 chi = -chi,
    and f = -H''/(2 kappa^2) are all closed-form; the background doubles as
    the exact metric oracle.
    """
    n = 2
    grid = Grid((1, resolution), (length, length))
    t, y, x = sp.symbols("t x1 x2", real=True)
    freq = TWO_PI / length
    h_prof = amp * sp.cos(freq * x)
    q = 1 + h_prof / 2
    shear = 1 - 1 / q
    ds = sp.diff(shear, x)
    h = sp.Matrix([
        [-1 / q, 0, 0],
        [0, q, t * ds * q],
        [0, t * ds * q, 1 + q * (t * ds) ** 2],
    ])
    bg = BackgroundMetric(n, h, t, (y, x))
    system = System(grid, bg, order)

    xs = grid.coords()[1]
    qn = 1 + amp * np.cos(freq * xs) / 2
    dq = -amp * freq * np.sin(freq * xs) / 2
    dshear = dq / qn**2

    shape = grid.shape
    g_sigma = np.zeros(shape + (n, n))
    g_sigma[..., 0, 0] = qn
    g_sigma[..., 1, 1] = 1.0
    lapse = qn**-0.5

    w_low = np.zeros(shape + (n, n))
    w_low[..., 0, 1] = -dshear * qn**1.5 / 2
    w_low[..., 1, 0] = w_low[..., 0, 1]
    w = np.zeros(shape + (n, n))
    w[..., 0, 1] = w_low[..., 0, 1] / qn
    w[..., 1, 0] = w_low[..., 1, 0]

    rep = build_gamma(n)
    chi = canonical_null_spinor(rep, axis=1, sign=-1)
    phi = math.sqrt(kappa / math.sqrt(2.0)) * qn[..., None]**-0.25 * chi

    f_exact = amp * freq**2 * np.cos(freq * xs) / (2 * kappa**2)

    data = InitialSurfaceData(grid, g_sigma, w, phi, lapse)
    extras = {
        "f_init": f_exact,
        "f_exact": f_exact,
        "metric_oracle": bg,
        "kappa": kappa,
        "t_end_crossing": length,
    }
    return system, data, extras


SCENARIOS = {
    "minkowski": Scenario(
        name="minkowski", n=2,
        description="flat slice, zero W, constant null spinor; exact "
                    "fixed point",
        check_tol=1e-12, default_resolution=16,
        defaults={"n": 2, "lapse": 1.0, "length": TWO_PI},
        _build=_build_minkowski),
    "warped": Scenario(
        name="warped", n=3,
        description="flat 3-torus with periodically scaled spinor; "
                    "Ricci-flat development",
        check_tol=1e-4, default_resolution=64,
        defaults={"n": 3, "amp": 0.15, "length": TWO_PI},
        _build=_build_warped),
    "pp_wave": Scenario(
        name="pp_wave", n=2,
        description="plane wave in a shear-adapted slicing; exact "
                    "nonflat oracle with f != 0",
        check_tol=1e-4, default_resolution=64,
        defaults={"amp": 0.05, "kappa": math.sqrt(2.0), "length": TWO_PI},
        _build=_build_pp_wave),
}


def get_scenario(name):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; available: "
                         f"{', '.join(sorted(SCENARIOS))}") from None
