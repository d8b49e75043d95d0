"""The discrete generator of the linearized flow and eigen-equation residuals.

In first-order form the linearization around ``kappa_d`` reads

    d/ds (q1, q2) = (-A q1 - s_p q1 + q2,  lap q1 + V_d q1 - A q2 - (s_p + 1) q2)

with ``A = y . grad`` and ``lap`` the Laplacian. Both come from the
discretization, so the same assembly serves the interval and every radial
sector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Discretization, StateVector, l2_norm, sample_state, sobolev_norm
from .errors import CapabilityError, DegenerateInputError
from .params import ModelParams, potential_V, symmetry_modes

__all__ = [
    "GeneratorMatrix",
    "assemble_generator",
    "apply_generator",
    "symmetry_residual",
    "eigen_equation_residual",
    "eigen_equation_lhs",
]


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    matrix: np.ndarray
    free: np.ndarray
    potential: np.ndarray
    params: ModelParams
    d: np.ndarray
    disc: Discretization

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _check_capability(params, d, disc):
    if disc.geometry == "box":
        raise CapabilityError("no generator on the residual box grid")
    if disc.geometry == "radial" and np.any(d != 0.0):
        raise CapabilityError(
            "direct assembly with d != 0 needs N = 1; for N >= 2 transport "
            "eigenfunctions with lorentz.eigenfunction_pullback instead")
    if disc.N != params.N:
        raise CapabilityError(f"discretization is for N = {disc.N}, params have N = {params.N}")


def assemble_generator(params: ModelParams, d=None, disc: Discretization = None,
                       with_potential=True) -> GeneratorMatrix:
    """Dense generator ``L_d`` on ``disc`` (``with_potential=False`` gives the free part)."""
    d = params.boost(d)
    _check_capability(params, d, disc)
    n, s = disc.n, params.s_p
    I = np.eye(n)
    free = np.block([[-disc.A - s * I, I],
                     [disc.lap, -disc.A - (s + 1.0) * I]])
    V = potential_V(disc.points, params, d) * np.ones(n)
    G = free.copy()
    if with_potential:
        G[n:, :n] += np.diag(V)
    return GeneratorMatrix(G, free, V, params, d, disc)


def apply_generator(G: GeneratorMatrix, sv: StateVector) -> StateVector:
    x = sv.stack()
    if x.size != G.size:
        raise ValueError(f"state has {x.size} entries, generator acts on {G.size}")
    return StateVector.from_stack(G.matrix @ x, G.disc)


def symmetry_residual(params: ModelParams, d=None, disc: Discretization = None):
    """Discrete ``H^k`` norms of ``L_d f_{0,d,i}`` (i = 1..N) and ``(I - L_d) f_{1,d}``.

    On a radial sector only the modes living there are checked: ``f_{1,0}`` in
    ``ell = 0`` and the ``f_{0,0,i}`` in ``ell = 1``; entries for modes outside
    the sector are ``None``.
    """
    G = assemble_generator(params, d, disc)
    M = G.matrix
    if disc.geometry == "interval":
        modes0, mode1 = symmetry_modes(params, G.d, disc.points)
        res0 = [sobolev_norm(StateVector.from_stack(M @ sample_state(m.values, disc).stack(), disc))
                for m in modes0]
        f1 = sample_state(mode1.values, disc).stack()
        res1 = sobolev_norm(StateVector.from_stack(f1 - M @ f1, disc))
        return res0, res1
    s, k0 = params.s_p, params.kappa0
    res0 = [None] * params.N
    res1 = None
    one = np.ones(disc.n)
    # reduced profiles: f_{1,0} = s k0 (1, s+1); f_{0,0,i} = r Y_1 s k0 (1, s+1) -> w = s k0 (1, s+1)
    f = np.concatenate([s * k0 * one, s * (s + 1.0) * k0 * one])
    if disc.ell == 0:
        res1 = sobolev_norm(StateVector.from_stack(f - M @ f, disc))
    elif disc.ell == 1:
        r = sobolev_norm(StateVector.from_stack(M @ f, disc))
        res0 = [r] * params.N
    return res0, res1


def eigen_equation_lhs(phi, lam, params: ModelParams, d, disc: Discretization):
    """Left side of the second-order eigen-equation for node values ``phi``.

    ``(lam^2 + (1 + 2 s_p) lam + s_p (s_p + 1) - V_d) phi
      + 2 (lam + s_p + 1) y.grad phi + (y_i y_j - delta_ij) d_i d_j phi``
    """
    d = params.boost(d)
    s = params.s_p
    phi = np.asarray(phi)
    if disc.geometry == "box":
        return _box_lhs(phi, lam, params, d, disc)
    _check_capability(params, d, disc)
    V = potential_V(disc.points, params, d)
    Aphi = disc.A @ phi
    if disc.geometry == "interval":
        hess = (disc.nodes**2 - 1.0) * (disc.D2 @ phi)
    else:
        # y_i y_j d_i d_j = (y.grad)^2 - y.grad
        hess = disc.A @ Aphi - Aphi - disc.lap @ phi
    c0 = lam * lam + (1.0 + 2.0 * s) * lam + s * (s + 1.0)
    return (c0 - V) * phi + 2.0 * (lam + s + 1.0) * Aphi + hess


def _box_lhs(phi, lam, params, d, disc):
    N, s = params.N, params.s_p
    grid = disc.points
    D, D2 = disc.D, disc.D2

    def along(mat, v, ax):
        return np.moveaxis(np.tensordot(mat, v, axes=([1], [ax])), 0, ax)

    grads = [along(D, phi, i) for i in range(N)]
    ydotgrad = sum(grid[..., i] * grads[i] for i in range(N))
    second = np.zeros_like(phi)
    for i in range(N):
        for j in range(N):
            dij = along(D2, phi, i) if i == j else along(D, grads[j], i)
            second = second + (grid[..., i] * grid[..., j] - (i == j)) * dij
    V = potential_V(grid, params, d)
    c0 = lam * lam + (1.0 + 2.0 * s) * lam + s * (s + 1.0)
    return (c0 - V) * phi + 2.0 * (lam + s + 1.0) * ydotgrad + second


def eigen_equation_residual(phi, lam, params: ModelParams, d, disc: Discretization) -> float:
    """``||lhs||_2 / ||phi||_2`` with quadrature ``L^2`` norms on ``disc``."""
    nphi = l2_norm(phi, disc)
    if nphi == 0.0:
        raise DegenerateInputError("phi vanishes on the grid")
    return l2_norm(eigen_equation_lhs(phi, lam, params, d, disc), disc) / nphi
