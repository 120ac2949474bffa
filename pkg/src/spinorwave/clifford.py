"""Gamma matrix representations for signature (1, n) and spinor algebra.

Conventions used throughout the package:

* gamma_a gamma_b + gamma_b gamma_a = -2 eps_a delta_ab, with eps_0 = -1
  (timelike) and eps_a = +1 for a > 0.
* gamma_0 is Hermitian, the spatial gamma_a are anti-Hermitian, so every
  gamma_0 gamma_a is Hermitian and its realification is real symmetric.
* Hermitian pairing (v, w) = sum_k v_k conj(w_k); the Lorentzian spinor
  product is <v, w> = (gamma_0 v, w).  It satisfies <X.v, w> = <v, X.w>
  for Clifford multiplication by any vector X.
"""

from dataclasses import dataclass

import numpy as np

_SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

__all__ = [
    "GammaRep",
    "build_gamma",
    "clifford_action",
    "spinor_inner",
    "dirac_current",
    "current_norm",
    "realify_matrix",
    "realify_vector",
    "canonical_null_spinor",
]


def _euclidean_generators(m):
    """m Hermitian anticommuting matrices squaring to +Id, dim 2^(m//2)."""
    if m == 2:
        return [_SIGMA1.copy(), _SIGMA2.copy()]
    if m == 3:
        return [_SIGMA1.copy(), _SIGMA2.copy(), _SIGMA3.copy()]
    if m % 2 == 0:
        prev = _euclidean_generators(m - 2)
        dim = prev[0].shape[0]
        eye = np.eye(dim, dtype=complex)
        out = [np.kron(s, _SIGMA3) for s in prev]
        out.append(np.kron(eye, _SIGMA1))
        out.append(np.kron(eye, _SIGMA2))
        return out
    prev = _euclidean_generators(m - 1)
    k = (m - 1) // 2
    chi = prev[0]
    for s in prev[1:]:
        chi = chi @ s
    chi = ((-1j) ** k) * chi
    return prev + [chi]


@dataclass(frozen=True)
class GammaRep:
    """Gamma matrices for signature (1, n).

    gamma has shape (n+1, dim, dim); eps holds the signs (-1, +1, ..., +1).
    g0g holds the precomputed Hermitian products gamma_0 gamma_a.
    """

    n: int
    dim: int
    gamma: np.ndarray
    eps: np.ndarray
    g0g: np.ndarray

    @property
    def gamma0(self):
        return self.gamma[0]


def build_gamma(n):
    """Build the recursive tensor-product representation for n spatial dims.

    The spinor dimension is 2^floor((n+1)/2).  Raises for n < 2: lower
    dimensions are not accepted as evolution targets.
    """
    if n < 2:
        raise ValueError(f"need at least 2 spatial dimensions, got n={n}")
    m = n + 1
    sigmas = _euclidean_generators(m)
    dim = sigmas[0].shape[0]
    gamma = np.empty((m, dim, dim), dtype=complex)
    gamma[0] = sigmas[0]
    for a in range(1, m):
        gamma[a] = 1j * sigmas[a]
    eps = np.ones(m)
    eps[0] = -1.0
    g0g = np.einsum("ij,ajk->aik", gamma[0], gamma)
    return GammaRep(n=n, dim=dim, gamma=gamma, eps=eps, g0g=g0g)


def clifford_action(rep, v_frame, psi):
    """Clifford action of a vector with frame components v^a on a spinor.

    v_frame: (..., n+1) real, psi: (..., dim) complex.
    """
    return np.einsum("...a,aij,...j->...i", v_frame, rep.gamma, psi)


def spinor_inner(rep, v, w):
    """Lorentzian spinor product <v, w> = (gamma_0 v, w).  Shape (...,)."""
    return np.einsum("ij,...j,...i->...", rep.gamma0, v, np.conj(w))


def dirac_current(rep, psi):
    """Frame components V^a = -eps_a Re<gamma_a psi, psi> of the Dirac current.

    V is future-oriented causal; V^0 equals |psi|^2.
    """
    inner = np.einsum("aij,...j,...i->...a", rep.g0g, psi, np.conj(psi))
    return -rep.eps * np.real(inner)


def current_norm(rep, v_frame):
    """Minkowski square sum_a eps_a (V^a)^2 of frame components."""
    return np.einsum("a,...a,...a->...", rep.eps, v_frame, v_frame)


def realify_matrix(m):
    """Complex (..., d, d) -> real (..., 2d, 2d), [[Re, -Im], [Im, Re]].

    Hermitian input yields a symmetric real output.
    """
    re, im = np.real(m), np.imag(m)
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def realify_vector(v):
    """Complex (..., d) -> real (..., 2d), (Re, Im)."""
    return np.concatenate([np.real(v), np.imag(v)], axis=-1)


def canonical_null_spinor(rep, axis=1, sign=1):
    """Deterministic unit spinor in the sign-eigenspace of gamma_0
    gamma_axis (sign is +1 or -1).

    Its Dirac current is null and points along the (signed) frame axis;
    such a spinor satisfies the algebraic compatibility condition exactly.
    """
    mat = rep.g0g[axis]
    vals, vecs = np.linalg.eigh(mat)
    idx = int(np.argmin(np.abs(vals - sign)))
    if abs(vals[idx] - sign) > 1e-12:
        raise ValueError(f"gamma_0 gamma_a has no {sign:+d} eigenvalue")
    psi = vecs[:, idx]
    k = int(np.argmax(np.abs(psi)))
    phase = psi[k] / abs(psi[k])
    psi = psi / phase
    return psi / np.linalg.norm(psi)
