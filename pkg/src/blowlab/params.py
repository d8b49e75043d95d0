"""Model parameters, the boosted ODE blow-up profiles and their symmetry modes.

Everything here is a closed-form evaluator. Points ``y`` are plain arrays for
``N == 1`` and arrays with a trailing axis of length ``N`` otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterDomainError, SingularDomainError

log = logging.getLogger(__name__)

__all__ = [
    "ModelParams",
    "ProfileSample",
    "make_params",
    "gamma",
    "kappa_d",
    "u_star",
    "potential_V",
    "profile_pair",
    "symmetry_modes",
    "kappa_lower_bound",
    "as_boost",
    "boost_dot",
]


def as_boost(d, N):
    """Return ``d`` as a float array of shape ``(N,)``."""
    arr = np.atleast_1d(np.asarray(d, dtype=float)).reshape(-1)
    if arr.size == 1 and N > 1 and np.all(arr == 0):
        arr = np.zeros(N)
    if arr.size != N:
        raise ParameterDomainError(f"boost vector has {arr.size} components, expected N={N}")
    return arr


def boost_dot(d, y, N):
    """``d . y`` for points laid out as described in the module docstring."""
    y = np.asarray(y, dtype=float)
    if N == 1:
        return float(d[0]) * y
    return y @ d


def gamma(d) -> float:
    """Lorentz factor ``(1 - |d|^2)^(-1/2)``."""
    a2 = float(np.sum(np.square(d)))
    if a2 >= 1.0:
        raise ParameterDomainError(f"|d| = {np.sqrt(a2):.6g} must be < 1")
    return 1.0 / np.sqrt(1.0 - a2)


@dataclass(frozen=True)
class ModelParams:
    N: int
    p: float
    k: int
    R: float
    d0: np.ndarray = field(compare=False)
    omega0: float

    @property
    def s_p(self) -> float:
        return 2.0 / (self.p - 1.0)

    @property
    def omega_p(self) -> float:
        return min(1.0, self.s_p)

    @property
    def kappa0(self) -> float:
        return (2.0 * (self.p + 1.0) / (self.p - 1.0) ** 2) ** (1.0 / (self.p - 1.0))

    @property
    def omega_window(self) -> tuple[float, float]:
        """Open interval that the spectral-gap abscissa must lie in."""
        lo = max(-1.0, self.N / 2.0 - self.s_p - self.k, -self.s_p)
        return lo, 0.0

    @property
    def superconformal(self) -> bool:
        return self.N >= 2 and self.p > 1.0 + 4.0 / (self.N - 1.0)

    def gamma(self, d=None) -> float:
        return gamma(self.d0 if d is None else as_boost(d, self.N))

    def boost(self, d=None) -> np.ndarray:
        return self.d0.copy() if d is None else as_boost(d, self.N)

    def as_dict(self) -> dict:
        return {
            "N": self.N, "p": self.p, "k": self.k, "R": self.R,
            "d0": [float(v) for v in self.d0], "omega0": self.omega0,
            "s_p": self.s_p, "omega_p": self.omega_p, "kappa0": self.kappa0,
            "superconformal": self.superconformal,
        }


def make_params(N=1, p=3.0, k=1, R=1.0, d0=0.0, omega0=None) -> ModelParams:
    """Validate the model parameters and return a :class:`ModelParams`.

    ``omega0=None`` picks the midpoint of the admissible window
    ``(max{-1, N/2 - s_p - k, -s_p}, 0)``.
    """
    if int(N) != N or N < 1:
        raise ParameterDomainError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    if not p > 1.0:
        raise ParameterDomainError(f"p > 1 violated (p = {p})")
    if int(k) != k:
        raise ParameterDomainError(f"k must be an integer, got {k!r}")
    k = int(k)
    if not k > N / 2.0:
        raise ParameterDomainError(f"k > N/2 violated (k = {k}, N/2 = {N / 2})")
    if not R >= 1.0:
        raise ParameterDomainError(f"R >= 1 violated (R = {R})")
    d0 = as_boost(d0, N)
    nd0 = float(np.linalg.norm(d0))
    if nd0 >= 1.0:
        raise ParameterDomainError(f"|d0| < 1 violated (|d0| = {nd0})")
    if R * nd0 >= 1.0:
        raise ParameterDomainError(f"R*|d0| < 1 violated (R*|d0| = {R * nd0:.6g})")
    s_p = 2.0 / (p - 1.0)
    lo = max(-1.0, N / 2.0 - s_p - k, -s_p)
    if omega0 is None:
        omega0 = 0.5 * lo
    if not lo < omega0 < 0.0:
        raise ParameterDomainError(
            f"omega0 must satisfy {lo:.6g} < omega0 < 0 (got {omega0})")
    params = ModelParams(N=N, p=float(p), k=k, R=float(R), d0=d0, omega0=float(omega0))
    if not params.superconformal:
        log.warning("p = %g is not superconformal for N = %d; results lie outside "
                    "the superconformal hypothesis", p, N)
    if R > 1.0:
        log.warning("R = %g > 1 is experimental: the boundary is no longer characteristic", R)
    return params


@dataclass(frozen=True)
class ProfileSample:
    """Closed-form field sampled on a node set.

    ``values`` has shape ``y.shape[:-1]`` (scalar profiles) or ``(2, ...)``
    for state pairs; ``kind`` names the profile.
    """
    values: np.ndarray
    kind: str
    d: tuple
    meta: dict = field(default_factory=dict)


def _shift(params, d, y):
    d = params.boost(d)
    den = 1.0 + boost_dot(d, y, params.N)
    if np.any(den <= 0.0):
        raise SingularDomainError("1 + d.y <= 0 at some evaluation point")
    return d, den


def kappa_d(y, params: ModelParams, d=None):
    """Boosted profile ``kappa_0 (1-|d|^2)^(1/(p-1)) / (1+d.y)^(2/(p-1))``."""
    d, den = _shift(params, d, y)
    return params.kappa0 * gamma(d) ** (-params.s_p) * den ** (-params.s_p)


def u_star(t, x, params: ModelParams, T=1.0, x0=0.0, d=None):
    """Physical-space boosted blow-up solution ``u*_{T,x0,d}(t, x)``."""
    d = params.boost(d)
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    den = T - np.asarray(t, dtype=float) + boost_dot(d, x - x0, params.N)
    if np.any(den <= 0.0):
        raise SingularDomainError("T - t + d.(x - x0) <= 0: outside the domain of u*")
    return params.kappa0 * gamma(d) ** (-params.s_p) * den ** (-params.s_p)


def potential_V(y, params: ModelParams, d=None):
    """Linearization potential ``(s_p+1)(s_p+2)(1-|d|^2)(1+d.y)^(-2)``."""
    d, den = _shift(params, d, y)
    s = params.s_p
    return (s + 1.0) * (s + 2.0) * (1.0 - float(d @ d)) / den**2


def profile_pair(y, params: ModelParams, d=None):
    """State-space form ``(kappa_d, (y.grad + s_p) kappa_d)`` of the profile."""
    d, den = _shift(params, d, y)
    s = params.s_p
    c = params.kappa0 * gamma(d) ** (-s)
    return np.stack([c * den ** (-s), s * c * den ** (-s - 1.0)])


def symmetry_modes(params: ModelParams, d=None, y=None):
    """Eigenvalue-0 modes ``f_{0,d,i}`` (i = 1..N) and the eigenvalue-1 mode ``f_{1,d}``.

    Returns ``(modes0, mode1)`` where ``modes0`` is a list of N samples. Each
    sample holds a ``(2, ...)`` array. The second component of ``f_{0,d,i}``
    is ``(y.grad + s_p)`` applied to the first, which is what the generator's
    first row requires.
    """
    d, den = _shift(params, d, y)
    N, s, k0 = params.N, params.s_p, params.kappa0
    g = gamma(d)
    y = np.asarray(y, dtype=float)
    c = s * k0 * g ** (-s)
    mode1 = ProfileSample(
        values=np.stack([c * den ** (-s - 1.0), c * (s + 1.0) * den ** (-s - 2.0)]),
        kind="f1", d=tuple(d))
    modes0 = []
    for i in range(N):
        yi = y if N == 1 else y[..., i]
        first = c * den ** (-s - 1.0) * yi + c * g**2 * den ** (-s) * d[i]
        second = c * (s + 1.0) * den ** (-s - 2.0) * yi + c * s * g**2 * den ** (-s - 1.0) * d[i]
        modes0.append(ProfileSample(values=np.stack([first, second]), kind=f"f0_{i + 1}",
                                    d=tuple(d), meta={"component": i}))
    return modes0, mode1


def kappa_lower_bound(params: ModelParams, radius: float) -> float:
    """Smallest value of ``kappa_d`` on ``|y| <= R`` over ``|d - d0| <= radius``.

    The minimum sits at ``|d| = |d0| + radius`` with ``y`` parallel to
    ``d``; it is strictly positive as long as ``R (|d0| + radius) < 1``.
    """
    a = float(np.linalg.norm(params.d0)) + radius
    if params.R * a >= 1.0:
        raise ParameterDomainError(f"R*(|d0| + radius) = {params.R * a:.6g} must be < 1")
    s = params.s_p
    return params.kappa0 * (1.0 - a * a) ** (s / 2.0) * (1.0 + a * params.R) ** (-s)
