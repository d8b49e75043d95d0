"""Lorentz boosts in physical and in similarity coordinates.

A boost with velocity ``beta`` acts on a similarity-variable field ``U(s, y)``
by

    V(s', y') = (gamma (1 - beta.y'))^(-2/(p-1)) U(s, y),
    s = s' - log(1 - beta.y'),
    y = (y' - gamma beta + gamma^2 (beta.y') beta / (1 + gamma)) / (gamma (1 - beta.y')).

With ``beta = d`` it maps ``kappa_d`` to ``kappa_0``, and an eigenfunction of
the linearization at ``kappa_d`` with eigenvalue ``lam`` to one at ``kappa_0``
with the same ``lam`` (the extra factor ``(gamma (1 - d.y'))^(-lam)`` comes from
``e^(lam s)``; the constant ``gamma^(-lam)`` is included so that the transports
by ``d`` and ``-d`` are exact inverses). The reverse direction is the same
formula with ``-d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Discretization, interpolate
from .errors import ExtrapolationError, ParameterDomainError, SingularDomainError
from .params import ModelParams, as_boost, boost_dot

__all__ = [
    "BoostChart",
    "make_chart",
    "boost_physical",
    "selfsim_pullback",
    "boost_selfsim",
    "static_field",
    "eigenfunction_transform",
    "eigenfunction_pushforward",
    "eigenfunction_pullback",
]


@dataclass(frozen=True)
class BoostChart:
    beta: np.ndarray
    gamma: float
    direction: str = "forward"

    @property
    def N(self) -> int:
        return len(self.beta)

    def inverse(self) -> "BoostChart":
        flip = "inverse" if self.direction == "forward" else "forward"
        return BoostChart(-self.beta, self.gamma, flip)


def make_chart(beta, N=None, direction="forward") -> BoostChart:
    b = np.atleast_1d(np.asarray(beta, dtype=float)).reshape(-1)
    if N is not None:
        b = as_boost(b, N)
    nb = float(np.linalg.norm(b))
    if nb >= 1.0:
        raise ParameterDomainError(f"|beta| < 1 violated (|beta| = {nb})")
    return BoostChart(b, 1.0 / np.sqrt(1.0 - nb * nb), direction)


def _dot(beta, y):
    return boost_dot(beta, y, len(beta))


def _mix(y, coef, beta, N):
    """``y + coef * beta`` with one scalar ``coef`` per point."""
    if N == 1:
        return y + coef * beta[0]
    return y + coef[..., None] * beta


def boost_physical(t, x, chart: BoostChart):
    """Lorentz-boosted coordinates ``(t', x')`` of ``(t, x)``."""
    b, g = chart.beta, chart.gamma
    N = chart.N
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    bx = _dot(b, x)
    tp = g * (t - bx)
    xp = _mix(x, -g * t + g * g / (1.0 + g) * bx, b, N)
    return tp, xp


def selfsim_pullback(s_prime, y_prime, chart: BoostChart):
    """Points ``(s, y)`` at which ``U`` is read to build the boosted field at ``(s', y')``."""
    b, g = chart.beta, chart.gamma
    N = chart.N
    y_prime = np.asarray(y_prime, dtype=float)
    by = _dot(b, y_prime)
    den = 1.0 - by
    if np.any(den <= 0.0):
        raise SingularDomainError("1 - beta.y' <= 0 at some evaluation point")
    s = np.asarray(s_prime, dtype=float) - np.log(den)
    num = _mix(y_prime, -g + g * g / (1.0 + g) * by, b, N)
    y = num / (g * den) if N == 1 else num / (g * den)[..., None]
    return s, y, den


def _radius(y, N):
    return np.abs(y) if N == 1 else np.linalg.norm(y, axis=-1)


def boost_selfsim(U, chart: BoostChart, params: ModelParams, s_prime, y_prime, domain_radius=None):
    """Evaluate the boosted field ``V = T_beta U`` at ``(s', y')``.

    ``U`` is a callable ``U(s, y)``. Points pulled back outside
    ``|y| <= domain_radius`` (default ``params.R``) raise
    :class:`ExtrapolationError`.
    """
    s, y, den = selfsim_pullback(s_prime, y_prime, chart)
    rmax = params.R if domain_radius is None else domain_radius
    if np.any(_radius(y, chart.N) > rmax * (1.0 + 1e-12)):
        raise ExtrapolationError("pulled-back point lies outside the field's domain")
    return (chart.gamma * den) ** (-params.s_p) * U(s, y)


def static_field(values, disc: Discretization):
    """Wrap node values as an ``s``-independent callable ``U(s, y)`` (barycentric)."""
    vals = np.asarray(values)

    def U(s, y):
        return interpolate(vals, disc, y)

    return U


def eigenfunction_transform(phi, lam, params: ModelParams, beta, y_prime, domain_radius=None):
    """Transport an eigenfunction profile ``phi`` through the boost ``beta``.

    ``psi(y') = (gamma (1 - beta.y'))^(-lam - 2/(p-1)) phi(y)``
    with ``y`` the pulled-back point. ``phi`` is a callable of ``y``.
    """
    chart = make_chart(beta, params.N)
    _, y, den = selfsim_pullback(0.0, y_prime, chart)
    rmax = params.R if domain_radius is None else domain_radius
    if np.any(_radius(y, params.N) > rmax * (1.0 + 1e-12)):
        raise ExtrapolationError("transported point lies outside |y| <= R")
    return (chart.gamma * den) ** (-lam - params.s_p) * phi(y)


def eigenfunction_pushforward(phi, lam, params: ModelParams, d, y_prime, domain_radius=None):
    """Map an eigenfunction at ``kappa_d`` to the ``kappa_0`` frame (boost by ``d``)."""
    return eigenfunction_transform(phi, lam, params, as_boost(d, params.N), y_prime, domain_radius)


def eigenfunction_pullback(psi, lam, params: ModelParams, d, y, domain_radius=None):
    """Map an eigenfunction at ``kappa_0`` to the ``kappa_d`` frame (boost by ``-d``)."""
    return eigenfunction_transform(psi, lam, params, -as_boost(d, params.N), y, domain_radius)
