"""Initial-data operator, the ``(T*, d*)`` parameter solve and the trapping trichotomy.

Data ``f`` given at blow-up time 1 around ``kappa_{d0}`` is rewritten around
``kappa_d`` with blow-up time ``T`` as

    Q_{d,T}(f) = f^T + f_0^T - f_d,   f^T(y) = (T^s f1(T y), T^(s+1) f2(T y)),

where ``f_0 = (kappa_{d0}, (y.grad + s) kappa_{d0})`` and ``f_d`` is the same
pair at ``d``. The parameters are chosen so that the stabilized solution needs
no correction, which makes it a genuine solution.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .discretization import Discretization, build_disc, cheb, l2_norm
from .errors import (CapabilityError, InconsistencyError, PreconditionError,
                     ShootingFailureError)
from .evolution import (EvolutionTrace, evolve_nonlinear, fit_decay_rate, stabilized_fixed_point,
                        state_norms)
from .operator import assemble_generator
from .params import ModelParams, kappa_d, profile_pair, symmetry_modes
from .spectrum import spectral_split

log = logging.getLogger(__name__)

__all__ = [
    "ShootingResult",
    "TrapRecord",
    "initial_data_Q",
    "expansion_remainder",
    "shooting_map",
    "solve_parameters",
    "perturbation_from_field",
    "classify_trapping",
    "random_smooth_data",
]

CLASSES = ("blowup-mismatch", "decay-to-zero", "trapped")


@dataclass(frozen=True, eq=False)
class ShootingResult:
    T_star: float
    d_star: np.ndarray
    residual: np.ndarray
    iterations: int
    weighted_norm: float
    decay_ratio: float
    decay_ok: bool
    prediction: np.ndarray
    history: list
    trace: EvolutionTrace
    classification: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def b_star(self) -> float:
        return 1.0 / self.T_star - 1.0


@dataclass(frozen=True, eq=False)
class TrapRecord:
    classification: str
    b_star: float
    shooting: ShootingResult
    observed: str
    direct: EvolutionTrace | None
    fitted_rate: float | None
    fitted_constant: float | None
    meta: dict = field(default_factory=dict)


def _eval_pair(f_pair, y):
    if f_pair is None:
        return np.zeros((2,) + np.shape(y))
    if callable(f_pair):
        return np.asarray(f_pair(y), dtype=float)
    return np.stack([np.asarray(f_pair[0](y), float), np.asarray(f_pair[1](y), float)])


def _dilate(pair, T, s, y):
    v = pair(T * y)
    return np.stack([T**s * v[0], T ** (s + 1.0) * v[1]])


def initial_data_Q(f_pair, params: ModelParams, d=None, T=1.0, disc: Discretization = None):
    """Stacked node values of ``Q_{d,T}(f)`` on an interval grid.

    ``f_pair`` is ``None`` (zero data), a callable returning a ``(2, ...)``
    array, or a pair of callables; it must be defined at the dilated nodes
    ``T y``.
    """
    if params.N != 1 or disc.geometry != "interval":
        raise CapabilityError("initial_data_Q is implemented for N = 1 on an interval grid")
    s = params.s_p
    y = disc.points
    fT = _dilate(lambda z: _eval_pair(f_pair, z), T, s, y)
    f0T = _dilate(lambda z: profile_pair(z, params, params.d0), T, s, y)
    fd = profile_pair(y, params, d)
    Q = fT + f0T - fd
    return np.concatenate([Q[0], Q[1]])


def _fit_order(h, r):
    h, r = np.asarray(h), np.asarray(r)
    ok = r > 0
    return float(np.polyfit(np.log(h[ok]), np.log(r[ok]), 1)[0])


def expansion_remainder(params: ModelParams, disc: Discretization = None,
                        T_offsets=(0.04, 0.02, 0.01, 0.005), d_offsets=(0.04, 0.02, 0.01, 0.005)):
    """Norm of ``Q_{d,T}(0) - (T-1) f_{1,d} - (d - d0) f_{0,d}`` along both axes.

    Returns a dict with the rows ``(T, d, remainder)`` and the fitted orders
    in ``|T - 1|`` (at ``d = d0``) and ``|d - d0|`` (at ``T = 1``).
    """
    disc = build_disc("interval", 48, params.R, params.k) if disc is None else disc
    d0 = params.d0
    rows = []

    def rem(T, d):
        Q = initial_data_Q(None, params, d, T, disc)
        modes0, mode1 = symmetry_modes(params, d, disc.points)
        lin = (T - 1.0) * mode1.values.reshape(-1)
        lin = lin + (d[0] - d0[0]) * modes0[0].values.reshape(-1)
        return float(state_norms(Q - lin, disc)[0])

    rT = []
    for h in T_offsets:
        rT.append(rem(1.0 + h, d0))
        rows.append({"T": 1.0 + h, "d": float(d0[0]), "remainder": rT[-1]})
    rd = []
    for h in d_offsets:
        rd.append(rem(1.0, d0 + h))
        rows.append({"T": 1.0, "d": float(d0[0] + h), "remainder": rd[-1]})
    return {"rows": rows, "order_T": _fit_order(T_offsets, rT),
            "order_d": _fit_order(d_offsets, rd), "zero": rem(1.0, d0)}


def shooting_map(theta, f_pair, params: ModelParams, disc: Discretization, fp_opts=None):
    """Amplitudes ``(a1, a0_1..a0_N)`` of the correction ``C_d(Q_{d,T}(f), q)``.

    ``theta = (T, d_1, ..., d_N)``. Returns ``(amplitudes, solution)``.
    """
    T, d = float(theta[0]), np.asarray(theta[1:], dtype=float)
    G = assemble_generator(params, d, disc)
    split = spectral_split(G)
    q0 = initial_data_Q(f_pair, params, d, T, disc)
    sol = stabilized_fixed_point(q0, params, d, G=G, split=split, check_size=False,
                                 **(fp_opts or {}))
    a1, a0 = split.amplitudes(sol.correction)
    return np.concatenate([[a1], np.atleast_1d(a0)]).real, sol


def solve_parameters(f_pair, params: ModelParams, disc: Discretization = None, M=48,
                     tol_shoot=1e-8, max_iter=12, delta=0.05, C=2.0, fd_step=1e-6, eps=0.1,
                     s_check=10.0, decay_bound=None, workers=1, fp_opts=None) -> ShootingResult:
    """Newton iteration for ``(T*, d*)`` with a forward-difference Jacobian.

    Iteration 0 evaluates ``(1, d0)``; the first update is the linear
    prediction ``T = 1 - a1(f)``, ``d = d0 - a0(f)``. Convergence means every
    amplitude is below ``tol_shoot``. The returned trajectory is checked
    against ``decay_bound * exp((-omega_p + eps) s)`` for ``s <= s_check``;
    ``decay_bound`` defaults to twice the data norm.
    """
    if params.N != 1:
        raise CapabilityError("parameter shooting is implemented for N = 1")
    disc = build_disc("interval", M, params.R, params.k) if disc is None else disc
    f_nodes = initial_data_Q(f_pair, params, params.d0, 1.0, disc)
    f_norm = float(state_norms(f_nodes, disc)[0])
    if f_norm > delta / C**2:
        raise PreconditionError(f"||f|| = {f_norm:.3e} exceeds delta/C^2 = {delta / C**2:.3e}")

    def F(theta):
        return shooting_map(theta, f_pair, params, disc, fp_opts)

    theta = np.concatenate([[1.0], params.d0])
    val, sol = F(theta)
    history = [(theta.copy(), val.copy())]
    prediction = theta - val
    it = 0
    if np.max(np.abs(val)) > tol_shoot:
        theta = prediction.copy()
        val, sol = F(theta)
        history.append((theta.copy(), val.copy()))
        it = 1
        pool = ThreadPoolExecutor(workers) if workers > 1 else None
        try:
            while np.max(np.abs(val)) > tol_shoot:
                if it >= max_iter:
                    raise ShootingFailureError(f"Newton stagnated after {max_iter} iterations",
                                               history)
                shifted = [theta + fd_step * e for e in np.eye(theta.size)]
                cols = list(pool.map(lambda t: F(t)[0], shifted) if pool else map(lambda t: F(t)[0], shifted))
                J = np.stack([(c - val) / fd_step for c in cols], axis=1)
                theta = theta - np.linalg.solve(J, val)
                val, sol = F(theta)
                history.append((theta.copy(), val.copy()))
                it += 1
        finally:
            if pool:
                pool.shutdown()
    T_star, d_star = float(theta[0]), theta[1:].copy()
    radius = delta / C
    if abs(T_star - 1.0) > radius or np.linalg.norm(d_star - params.d0) > radius:
        raise ShootingFailureError(
            f"converged parameters leave the admissible ball of radius {radius:.3g}", history)
    tr = sol.trace
    bound = 2.0 * f_norm if decay_bound is None else decay_bound
    win = tr.s <= s_check + 1e-12
    envelope = np.exp((-params.omega_p + eps) * tr.s[win])
    if bound > 0:
        ratio = float(np.max(tr.norms[win] / (bound * envelope)))
    else:
        ratio = 0.0 if np.max(tr.norms[win]) == 0.0 else np.inf
    wnorm = float(np.max(np.exp(-params.omega0 * tr.s) * tr.norms))
    return ShootingResult(T_star, d_star, val, it, wnorm, ratio, ratio <= 1.0, prediction,
                          history, tr, None,
                          {"f_norm": f_norm, "decay_bound": bound, "eps": eps,
                           "correction_norm": float(state_norms(sol.correction, disc)[0]),
                           "fp_iterations": sol.iterations})


def perturbation_from_field(U, U_s, params: ModelParams, M_proxy=64, reach=1.5):
    """Data pair ``(U - kappa_{d0}, U_s + (y.grad + s)(U - kappa_{d0}))`` as a callable.

    ``y.grad`` is taken spectrally on a Chebyshev proxy over ``[-a, a]`` with
    ``a = min(reach R, 0.95 / |d0|)``, wide enough for the dilations used
    while shooting.
    """
    nd0 = float(np.linalg.norm(params.d0))
    a = reach * params.R if nd0 == 0 else min(reach * params.R, 0.95 / nd0)
    x, D = cheb(M_proxy, a)
    f1 = np.asarray(U(x), float) - kappa_d(x, params, params.d0)
    f2 = np.asarray(U_s(x), float) + x * (D @ f1) + params.s_p * f1
    w = (-1.0) ** np.arange(M_proxy + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    i1 = BarycentricInterpolator(x, f1, wi=w)
    i2 = BarycentricInterpolator(x, f2, wi=w)

    def pair(y):
        y = np.asarray(y, float)
        if np.any(np.abs(y) > a * (1.0 + 1e-12)):
            raise ValueError(f"data proxy is defined on |y| <= {a:.4g}")
        return np.stack([i1(y), i2(y)])

    pair.reach = a
    return pair


def _observe(trace: EvolutionTrace, params, disc, f_norm, decay_level=1e-2, trap_factor=100.0):
    if trace.diverged:
        return "blowup-mismatch"
    n = disc.n
    kap = kappa_d(disc.points, params, params.d0)
    U = trace.states[:, :n] + kap
    uL2 = np.array([l2_norm(u, disc) for u in U])
    j = int(0.8 * (len(uL2) - 1))
    if uL2[-1] <= decay_level * l2_norm(kap, disc) and uL2[-1] < uL2[j]:
        return "decay-to-zero"
    if np.max(trace.norms) <= trap_factor * f_norm + 1e-14:
        return "trapped"
    return "undetermined"


def classify_trapping(U0_pair, params: ModelParams, disc: Discretization = None, M=48,
                      tol_b=1e-6, s_direct=25.0, cross_check=True, **solver_opts) -> TrapRecord:
    """Trichotomy from ``b* = 1/T* - 1`` with a direct nonlinear run as cross-check.

    ``U0_pair`` is ``(U, U_s)`` (callables of ``y``) or a data pair already
    in perturbation form (a single callable, see :func:`perturbation_from_field`).
    """
    disc = build_disc("interval", M, params.R, params.k) if disc is None else disc
    if callable(U0_pair):
        f_pair = U0_pair
    else:
        f_pair = perturbation_from_field(U0_pair[0], U0_pair[1], params)
    res = solve_parameters(f_pair, params, disc, **solver_opts)
    b = res.b_star
    if b > tol_b:
        cls = "blowup-mismatch"
    elif b < -tol_b:
        cls = "decay-to-zero"
    else:
        cls = "trapped"
    rate = const = None
    if cls == "trapped":
        tr = res.trace
        if np.all(tr.norms[tr.s >= 1.0] > 1e-14) and np.any(tr.norms > 0):
            rate, pref, _ = fit_decay_rate(tr, 1.0, 10.0)
            const = pref / max(res.meta["f_norm"], 1e-300)
    observed, direct = "not-run", None
    if cross_check:
        q0 = initial_data_Q(f_pair, params, params.d0, 1.0, disc)
        direct = evolve_nonlinear(q0, params, params.d0, s_end=s_direct, disc=disc)
        observed = _observe(direct, params, disc, res.meta["f_norm"])
        if observed != cls:
            raise InconsistencyError(
                f"b* = {b:.3e} gives {cls}, direct evolution observed {observed}")
    res = replace(res, classification=cls)
    return TrapRecord(cls, b, res, observed, direct, rate, const,
                      {"tol_b": tol_b, "s_direct": s_direct})


def random_smooth_data(rng, params: ModelParams, disc: Discretization, norm=1e-4, n_modes=6,
                       reach=2.0):
    """Random data pair with decaying Chebyshev coefficients on ``[-reach, reach]``.

    The pair is a callable scaled so that its discrete norm on ``disc`` is
    ``norm``; it can be evaluated anywhere in ``|y| <= reach``.
    """
    c = rng.standard_normal((2, n_modes)) / np.arange(1, n_modes + 1) ** 2

    def raw(y):
        t = np.arccos(np.clip(np.asarray(y, float) / reach, -1.0, 1.0))
        return np.stack([sum(c[i, j] * np.cos(j * t) for j in range(n_modes)) for i in range(2)])

    vals = raw(disc.nodes)
    scale = norm / float(state_norms(np.concatenate([vals[0], vals[1]]), disc)[0])

    def pair(y):
        return scale * raw(y)

    return pair
