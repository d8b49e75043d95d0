"""Chebyshev collocation grids, quadrature and discrete Sobolev norms.

Three geometries are supported:

``interval``
    ``N = 1``; Chebyshev-Gauss-Lobatto nodes on ``[-R, R]``.
``radial``
    one spherical-harmonic sector of degree ``ell`` in ``N >= 2``. A sector
    field ``u(r) Y_ell`` is stored through its reduced profile ``w = u / r^ell``,
    which is even in ``r``; the grid is the positive half of a Chebyshev grid
    of odd degree ``2M + 1`` on ``[-R, R]`` (so ``r = 0`` is never a node) and
    derivative matrices are folded with the even extension.
``box``
    tensor Chebyshev grid on the cube ``[-a, a]^N`` with ``a = R / sqrt(N)``,
    which sits inside the ball. Only used to evaluate residuals of transported
    non-radial fields; no generator is ever assembled on it.

For ``interval`` and ``radial`` the discretization carries two matrices that
all operators are written in: ``A`` realizes ``y . grad`` and ``lap`` realizes
the Laplacian, both acting on stored node values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .errors import CapabilityError, ExtrapolationError, ResolutionError

__all__ = [
    "Discretization",
    "StateVector",
    "build_disc",
    "radial_sectors",
    "harmonic_dimension",
    "cheb",
    "clenshaw_curtis",
    "sobolev_norm",
    "sample_function",
    "sample_state",
    "differentiate",
    "interpolate",
    "l2_norm",
]

GEOMETRIES = ("interval", "radial", "box")


def cheb(M, R=1.0):
    """Chebyshev-Gauss-Lobatto nodes ``R cos(pi j / M)`` and the first-derivative matrix."""
    j = np.arange(M + 1)
    x = np.cos(np.pi * j / M)
    c = np.ones(M + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(M + 1))
    # negative-sum trick keeps D exact on constants
    D -= np.diag(D.sum(axis=1))
    return R * x, D / R


def clenshaw_curtis(M, R=1.0):
    """Clenshaw-Curtis weights matching the nodes of :func:`cheb`."""
    theta = np.pi * np.arange(M + 1) / M
    w = np.zeros(M + 1)
    v = np.ones(M - 1)
    inner = slice(1, M)
    if M % 2 == 0:
        w[0] = w[M] = 1.0 / (M**2 - 1)
        for m in range(1, M // 2):
            v -= 2.0 * np.cos(2 * m * theta[inner]) / (4 * m * m - 1)
        v -= np.cos(M * theta[inner]) / (M**2 - 1)
    else:
        w[0] = w[M] = 1.0 / M**2
        for m in range(1, (M - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * m * theta[inner]) / (4 * m * m - 1)
    w[inner] = 2.0 * v / M
    return R * w


def _cheb_bary_weights(n):
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def harmonic_dimension(ell, N):
    """Number of independent spherical harmonics of degree ``ell`` in ``N`` dimensions."""
    if N == 1:
        return 1 if ell in (0, 1) else 0
    if N == 2:
        return 1 if ell == 0 else 2
    from math import comb
    return comb(ell + N - 1, N - 1) - (comb(ell + N - 3, N - 1) if ell >= 2 else 0)


@dataclass(frozen=True, eq=False)
class Discretization:
    geometry: str
    M: int
    R: float
    k: int
    N: int
    ell: int
    nodes: np.ndarray
    D: np.ndarray
    D2: np.ndarray
    weights: np.ndarray
    A: np.ndarray | None = None
    lap: np.ndarray | None = None
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def points(self) -> np.ndarray:
        """Evaluation points for closed-form profiles.

        ``(n,)`` on an interval; radial nodes are embedded along the first
        axis as ``(n, N)``; the box returns its ``(M+1,)*N + (N,)`` grid.
        """
        if self.geometry == "box":
            return self.extras["grid"]
        if self.geometry == "radial":
            pts = np.zeros((self.n, self.N))
            pts[:, 0] = self.nodes
            return pts
        return self.nodes

    @cached_property
    def gram(self):
        """Gram matrices ``(W1, W2)`` with ``||(q1, q2)||^2 = q1.W1.q1 + q2.W2.q2``."""
        return _build_gram(self)

    @cached_property
    def l2_weights(self):
        if self.geometry == "box":
            return self.extras["tensor_weights"]
        if self.geometry == "interval":
            return self.weights
        E = self.extras["extend"]
        wf = self.extras["full_weights"] * np.abs(self.extras["full_nodes"]) ** (self.N - 1) / 2.0
        rl = self.nodes**self.ell
        return (np.abs(E).T @ wf) * rl**2


@dataclass(frozen=True, eq=False)
class StateVector:
    """Discrete pair ``(q1, q2)`` on a shared node set."""
    q1: np.ndarray
    q2: np.ndarray
    disc: Discretization

    def __post_init__(self):
        if np.shape(self.q1) != np.shape(self.q2):
            raise ValueError("q1 and q2 must share the node set")

    def stack(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.q1), np.ravel(self.q2)])

    @classmethod
    def from_stack(cls, x, disc):
        x = np.asarray(x)
        n = disc.n
        return cls(x[:n].copy(), x[n:].copy(), disc)

    @classmethod
    def zeros(cls, disc):
        return cls(np.zeros(disc.n), np.zeros(disc.n), disc)

    def __add__(self, other):
        return StateVector(self.q1 + other.q1, self.q2 + other.q2, self.disc)

    def __sub__(self, other):
        return StateVector(self.q1 - other.q1, self.q2 - other.q2, self.disc)

    def __mul__(self, c):
        return StateVector(c * self.q1, c * self.q2, self.disc)

    __rmul__ = __mul__

    def norm(self) -> float:
        return sobolev_norm(self)


def build_disc(geometry="interval", M=32, R=1.0, k=1, N=1, ell=0) -> Discretization:
    """Build an immutable discretization.

    For ``radial`` the full grid has degree ``2M + 1``, so there are ``M + 1``
    stored nodes and the stacked state has the same size as on an interval.
    """
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}; choose from {GEOMETRIES}")
    if M < 8:
        raise ResolutionError(f"M = {M} is too small (need M >= 8)")
    if R < 1.0:
        raise ValueError(f"R = {R} must be >= 1")
    if geometry == "interval":
        if N != 1:
            raise CapabilityError("interval geometry is the N = 1 case")
        x, D = cheb(M, R)
        A = x[:, None] * D
        D2 = D @ D
        return Discretization("interval", M, float(R), k, 1, 0, x, D, D2,
                              clenshaw_curtis(M, R), A=A, lap=D2,
                              extras={"bary": _cheb_bary_weights(M + 1)})
    if geometry == "radial":
        if N < 2:
            raise CapabilityError("radial sectors need N >= 2")
        return _build_radial(M, R, k, N, ell)
    return _build_box(M, R, k, N)


def _build_radial(M, R, k, N, ell):
    Mf = 2 * M + 1
    xf, Df = cheb(Mf, R)
    half = M + 1
    mirror = Mf - np.arange(half)
    D = Df[:half, :half] + Df[:half, mirror]
    D2full = Df @ Df
    D2 = D2full[:half, :half] + D2full[:half, mirror]
    r = xf[:half]
    A = r[:, None] * D + ell * np.eye(half)
    lap = D2 + ((2 * ell + N - 1) / r)[:, None] * D
    # parity extension of the physical profile u = r^ell w to the full grid
    E = np.zeros((Mf + 1, half))
    E[np.arange(half), np.arange(half)] = 1.0
    E[mirror, np.arange(half)] = (-1.0) ** ell
    return Discretization("radial", M, float(R), k, N, ell, r, D, D2,
                          clenshaw_curtis(Mf, R)[:half], A=A, lap=lap,
                          extras={"full_nodes": xf, "full_D": Df, "extend": E,
                                  "full_weights": clenshaw_curtis(Mf, R),
                                  "bary": _cheb_bary_weights(Mf + 1)})


def _build_box(M, R, k, N):
    a = R / np.sqrt(N)
    x, D = cheb(M, a)
    w = clenshaw_curtis(M, a)
    mesh = np.meshgrid(*([x] * N), indexing="ij")
    grid = np.stack(mesh, axis=-1)
    tw = w
    for _ in range(N - 1):
        tw = np.multiply.outer(tw, w)
    return Discretization("box", M, float(R), k, N, 0, x, D, D @ D, w,
                          extras={"grid": grid, "tensor_weights": tw, "half_width": a,
                                  "bary": _cheb_bary_weights(M + 1)})


def radial_sectors(M, R=1.0, k=1, N=3, ell_max=8):
    """One radial discretization per harmonic degree ``0..ell_max``."""
    return [build_disc("radial", M, R, k, N, ell) for ell in range(ell_max + 1)]


def _build_gram(disc):
    k = disc.k
    if disc.geometry == "box":
        raise CapabilityError("Sobolev norms are not defined on the residual box grid")
    if disc.geometry == "interval":
        ops = [np.eye(disc.n)]
        for _ in range(k):
            ops.append(disc.D @ ops[-1])
        W = np.diag(disc.weights)
        W1 = sum(o.T @ W @ o for o in ops)
        W2 = sum(o.T @ W @ o for o in ops[:k])
        return W1, W2
    # radial sector: radial derivatives of u = r^ell w on the full grid,
    # plus an angular term ell(ell+N-2) times the next-lower order
    Df = disc.extras["full_D"]
    xf = disc.extras["full_nodes"]
    lift = disc.extras["extend"] * (disc.nodes**disc.ell)[None, :]
    W = np.diag(disc.extras["full_weights"] * np.abs(xf) ** (disc.N - 1) / 2.0)
    ops = [lift]
    for _ in range(k):
        ops.append(Df @ ops[-1])
    terms = [o.T @ W @ o for o in ops]
    ang = disc.ell * (disc.ell + disc.N - 2)
    W1 = sum(terms) + ang * sum(terms[:k])
    W2 = sum(terms[:k]) + ang * sum(terms[:k - 1])
    return W1, W2


def sobolev_norm(sv: StateVector) -> float:
    """Discrete ``H^k x H^{k-1}`` norm of a state."""
    disc = sv.disc
    if disc.k > disc.M / 2:
        raise ResolutionError(f"k = {disc.k} exceeds M/2 = {disc.M / 2}")
    W1, W2 = disc.gram
    q1, q2 = np.asarray(sv.q1), np.asarray(sv.q2)
    val = np.real(np.conj(q1) @ W1 @ q1 + np.conj(q2) @ W2 @ q2)
    return float(np.sqrt(max(val, 0.0)))


def l2_norm(values, disc) -> float:
    """Quadrature ``L^2`` norm of a scalar node field."""
    v = np.asarray(values)
    return float(np.sqrt(np.sum(disc.l2_weights * np.abs(v) ** 2)))


def sample_function(f, disc):
    """Sample an evaluator on the nodes.

    On a radial sector the reduced profile ``f(r) / r^ell`` is returned.
    """
    if disc.geometry == "box":
        return np.asarray(f(disc.points), dtype=float)
    vals = np.asarray(f(disc.nodes))
    if disc.geometry == "radial" and disc.ell:
        vals = vals / disc.nodes**disc.ell
    return vals


def sample_state(pair, disc) -> StateVector:
    """Build a state from a ``(2, n)`` array or a pair of evaluators."""
    if callable(pair):
        arr = np.asarray(pair(disc.points))
        return StateVector(arr[0], arr[1], disc)
    if len(pair) == 2 and callable(pair[0]):
        return StateVector(sample_function(pair[0], disc), sample_function(pair[1], disc), disc)
    arr = np.asarray(pair)
    return StateVector(arr[0], arr[1], disc)


def differentiate(values, order, disc, axis=0):
    """Spectral derivative of a node field.

    On a radial sector this is ``d^order/dr^order`` of the physical profile
    ``u = r^ell w`` evaluated at the stored nodes.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"unsupported derivative order {order}")
    v = np.asarray(values)
    if order == 0:
        return v.copy()
    if disc.geometry == "interval":
        return (disc.D if order == 1 else disc.D2) @ v
    if disc.geometry == "box":
        Dm = disc.D if order == 1 else disc.D2
        return np.moveaxis(np.tensordot(Dm, v, axes=([1], [axis])), 0, axis)
    Df = disc.extras["full_D"]
    u = disc.extras["extend"] @ (v * disc.nodes**disc.ell)
    Dm = Df if order == 1 else Df @ Df
    return (Dm @ u)[: disc.n]


def interpolate(values, disc, points, tol=1e-12):
    """Barycentric Chebyshev interpolation of a node field (interval/radial)."""
    pts = np.asarray(points, dtype=float)
    if disc.geometry == "box":
        raise CapabilityError("use tensor interpolation on the box grid")
    if np.any(np.abs(pts) > disc.R * (1.0 + tol)):
        raise ExtrapolationError("interpolation point outside [-R, R]")
    if disc.geometry == "interval":
        interp = BarycentricInterpolator(disc.nodes, np.asarray(values), wi=disc.extras["bary"])
        return interp(pts)
    u = disc.extras["extend"] @ (np.asarray(values) * disc.nodes**disc.ell)
    interp = BarycentricInterpolator(disc.extras["full_nodes"], u, wi=disc.extras["bary"])
    r = np.abs(pts)
    out = interp(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        return out / r**disc.ell if disc.ell else out
