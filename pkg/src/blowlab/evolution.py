"""Linear and nonlinear evolution in similarity variables.

The perturbation ``q = (q1, q2)`` around ``kappa_d`` obeys

    q' = L_d q + (0, N_d(q1)),
    N_d(q1) = |kappa_d + q1|^(p-1) (kappa_d + q1) - kappa_d^p - p kappa_d^(p-1) q1.

Linear runs use dense matrix exponentials. Nonlinear runs use classical RK4.
The stabilized solution of the Duhamel formula, with the unstable directions
removed by a finite-rank correction, is computed by Picard iteration with an
exponential integrator on a uniform ``s`` grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import simpson
from scipy.special import binom

from .discretization import Discretization, StateVector, sample_state
from .errors import (CapabilityError, ContractionFailureError, DegenerateInputError,
                     NumericalFailureError, OverflowFailure, PreconditionError,
                     TailDivergenceError)
from .operator import GeneratorMatrix, assemble_generator
from .params import ModelParams, kappa_d
from .spectrum import SpectralSplit, spectral_split

log = logging.getLogger(__name__)

__all__ = [
    "EvolutionTrace",
    "StabilizedSolution",
    "nonlinearity",
    "nonlinear_term",
    "state_norms",
    "evolve_linear",
    "fit_decay_rate",
    "evolve_nonlinear",
    "correction_term",
    "stabilized_fixed_point",
    "duhamel_residual",
    "weighted_sup_norm",
]

BLOWUP_THRESHOLD = 1e6
UNDERFLOW_FLOOR = 1e-14
_SERIES_Z = 1e-2
_SERIES_TERMS = 12


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    s: np.ndarray
    norms: np.ndarray
    a1: np.ndarray
    a0: np.ndarray
    step_log: np.ndarray
    diverged: bool
    states: np.ndarray
    disc: Discretization
    meta: dict = field(default_factory=dict)

    def state(self, j) -> StateVector:
        return StateVector.from_stack(self.states[j], self.disc)


@dataclass(frozen=True, eq=False)
class StabilizedSolution:
    trace: EvolutionTrace
    correction: np.ndarray
    iterations: int
    ratios: list
    data: np.ndarray
    nonlinear: np.ndarray
    meta: dict = field(default_factory=dict)


def _block_gram(disc):
    W1, W2 = disc.gram
    return sla.block_diag(W1, W2)


def state_norms(X, disc) -> np.ndarray:
    """Discrete ``H^k x H^{k-1}`` norms of stacked states (one per row)."""
    X = np.atleast_2d(X)
    W = _block_gram(disc)
    val = np.einsum("ij,jk,ik->i", X, W, X)
    return np.sqrt(np.maximum(val, 0.0))


def nonlinear_term(q1, kappa, p):
    """Pointwise ``N(q1)`` for a positive profile ``kappa``.

    Small ``q1 / kappa`` uses the binomial series and moderate positive
    ``1 + q1 / kappa`` goes through ``expm1(p log1p(z))``; both avoid the
    cancellation of the displayed difference.
    """
    q1 = np.asarray(q1, dtype=float)
    z = q1 / kappa
    if float(p).is_integer() and int(p) % 2 == 1:
        # odd integer p: exact polynomial
        m = np.arange(2, int(p) + 1)
        poly = sum(binom(p, j) * z**j for j in m)
        return kappa**p * poly
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_Z
    zs = z[small]
    series = np.zeros_like(zs)
    for j in range(_SERIES_TERMS, 1, -1):
        series = (series + binom(p, j)) * zs
    out[small] = series * zs
    zl = z[~small]
    w = 1.0 + zl
    pos = w > 0.0
    if not pos.all():
        log.info("kappa_d + q1 changes sign at %d node(s)", int(np.sum(~pos)))
    big = np.empty_like(zl)
    big[pos] = np.expm1(p * np.log1p(zl[pos])) - p * zl[pos]
    big[~pos] = np.abs(w[~pos]) ** (p - 1.0) * w[~pos] - 1.0 - p * zl[~pos]
    out[~small] = big
    return kappa**p * out


def nonlinearity(sv: StateVector, params: ModelParams, d=None) -> StateVector:
    """``(0, N_d(q1))`` on the grid of ``sv``."""
    disc = sv.disc
    if disc.geometry != "interval":
        raise CapabilityError("the nonlinearity is evaluated on interval grids")
    kappa = kappa_d(disc.points, params, d)
    with np.errstate(over="ignore", invalid="ignore"):
        val = nonlinear_term(sv.q1, kappa, params.p)
    bad = np.flatnonzero(~np.isfinite(val))
    if bad.size:
        raise OverflowFailure(f"non-finite nonlinearity at node {int(bad[0])}")
    return StateVector(np.zeros_like(val), val, disc)


def _split_for(G, split):
    if split is not None:
        return split
    if G.disc.geometry != "interval":
        return None
    return spectral_split(G)


def _amplitudes(X, split, N):
    if split is None:
        m = X.shape[0]
        return np.full(m, np.nan), np.full((m, N), np.nan)
    return X @ split.coords1, X @ split.coords0.T


def _as_stack(q0, disc):
    if isinstance(q0, StateVector):
        return q0.stack()
    arr = np.asarray(q0, dtype=float)
    if arr.ndim == 2:
        return sample_state(arr, disc).stack()
    if arr.size != 2 * disc.n:
        raise ValueError(f"state has {arr.size} entries, grid needs {2 * disc.n}")
    return arr.copy()


def _rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _spectral_radius(A):
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def evolve_linear(q0, G: GeneratorMatrix, s_end, method="expm", ds=0.05, c_rk=0.5,
                  split: SpectralSplit | None = None) -> EvolutionTrace:
    """``q(s) = exp(s G) q0`` at checkpoints ``0, ds, 2 ds, ..., s_end``.

    ``method="rk4"`` integrates ``q' = G q`` instead, with step
    ``c_rk / rho(G)`` (cross-check mode).
    """
    disc = G.disc
    x = _as_stack(q0, disc)
    n_out = int(round(s_end / ds))
    if n_out < 1:
        raise ValueError("s_end must be at least one checkpoint interval")
    s = ds * np.arange(n_out + 1)
    X = np.empty((n_out + 1, x.size))
    X[0] = x
    if method == "expm":
        E = sla.expm(ds * G.matrix)
        for j in range(n_out):
            X[j + 1] = E @ X[j]
        steps = np.full(n_out, ds)
    elif method == "rk4":
        h0 = c_rk / _spectral_radius(G.matrix)
        sub = max(1, int(np.ceil(ds / h0)))
        h = ds / sub
        if h < 1e-12:
            raise NumericalFailureError(f"RK4 step {h:.3e} underflows")
        A = G.matrix
        for j in range(n_out):
            y = X[j]
            for _ in range(sub):
                y = _rk4_step(lambda v: A @ v, y, h)
            X[j + 1] = y
        steps = np.full(n_out * sub, h)
    else:
        raise ValueError(f"unknown method {method!r}")
    split = _split_for(G, split)
    a1, a0 = _amplitudes(X, split, G.params.N)
    norms = state_norms(X, disc)
    return EvolutionTrace(s, norms, a1, a0, steps, False, X, disc, {"method": method})


def fit_decay_rate(trace, s_min=0.0, s_max=None, min_samples=10):
    """Least-squares fit ``log ||q(s)|| ~ log(prefactor) + rate s``.

    Samples below the underflow floor end the fit window. Returns
    ``(rate, prefactor, r2)``.
    """
    s = np.asarray(trace.s if hasattr(trace, "s") else trace[0], dtype=float)
    norms = np.asarray(trace.norms if hasattr(trace, "norms") else trace[1], dtype=float)
    keep = s >= s_min
    if s_max is not None:
        keep &= s <= s_max
    s, norms = s[keep], norms[keep]
    low = np.flatnonzero(norms < UNDERFLOW_FLOOR)
    if low.size:
        log.info("norm below %.0e at s = %.4g; fit truncated", UNDERFLOW_FLOOR, s[low[0]])
        s, norms = s[:low[0]], norms[:low[0]]
    if s.size < min_samples:
        raise DegenerateInputError(f"only {s.size} usable samples beyond s_min = {s_min}")
    y = np.log(norms)
    slope, icpt = np.polyfit(s, y, 1)
    resid = y - (slope * s + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(np.exp(icpt)), r2


def evolve_nonlinear(q0, params: ModelParams, d=None, s_end=10.0, disc=None, ds=0.05,
                     c_rk=0.5, blowup_threshold=BLOWUP_THRESHOLD, split=None,
                     G: GeneratorMatrix | None = None, max_halvings=30) -> EvolutionTrace:
    """RK4 method of lines for ``q' = L_d q + (0, N_d(q1))``.

    The base step is ``c_rk / rho(L_d)``. A step whose result is non-finite
    or whose norm jumps tenfold is retried with half the step. The run stops
    with ``diverged=True`` once the norm passes ``blowup_threshold``.
    """
    if G is None:
        G = assemble_generator(params, d, disc)
    disc = G.disc
    if disc.geometry != "interval":
        raise CapabilityError("nonlinear evolution runs on interval grids")
    A = G.matrix
    n = disc.n
    kappa = kappa_d(disc.points, params, G.d)
    W = _block_gram(disc)
    p = params.p

    def rhs(x):
        out = A @ x
        out[n:] += nonlinear_term(x[:n], kappa, p)
        return out

    def norm(x):
        return float(np.sqrt(max(x @ W @ x, 0.0)))

    x = _as_stack(q0, disc)
    nx = norm(x)
    if not nx < blowup_threshold:
        raise DegenerateInputError(f"initial norm {nx:.3e} is not below the blowup threshold")
    h_base = c_rk / _spectral_radius(A)
    sub = max(1, int(np.ceil(ds / h_base)))
    h_base = ds / sub
    s_list, X, steps = [0.0], [x.copy()], []
    s_now, diverged = 0.0, False
    n_out = int(round(s_end / ds))
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_out):
            target = (j + 1) * ds
            while s_now < target - 1e-13:
                h = min(h_base, target - s_now)
                for _ in range(max_halvings):
                    y = _rk4_step(rhs, x, h)
                    ny = norm(y) if np.all(np.isfinite(y)) else np.inf
                    if np.isfinite(ny) and ny <= 10.0 * nx + 1e-300:
                        break
                    if np.isfinite(ny) and ny > blowup_threshold and nx > 0.01 * blowup_threshold:
                        break
                    h *= 0.5
                else:
                    raise OverflowFailure(f"step size underflow / non-finite state at s = {s_now:.6g}")
                x, nx = y, ny
                s_now += h
                steps.append(h)
                if nx > blowup_threshold:
                    diverged = True
                    break
            s_list.append(s_now)
            X.append(x.copy())
            if diverged:
                break
    X = np.array(X)
    s = np.array(s_list)
    if not np.all(np.isfinite(X)):
        raise OverflowFailure(f"NaN in state at s = {s[-1]:.6g}")
    split = _split_for(G, split)
    a1, a0 = _amplitudes(X, split, params.N)
    return EvolutionTrace(s, state_norms(X, disc), a1, a0, np.array(steps), diverged, X, disc,
                          {"method": "rk4", "h_base": h_base, "blowup_threshold": blowup_threshold})


def _tail_rate(norm_values, s):
    """Decay rate of the last third of a positive sequence."""
    m = max(3, len(s) // 3)
    v = np.asarray(norm_values[-m:])
    if np.any(v <= 0.0):
        return -np.inf
    return float(np.polyfit(s[-m:], np.log(v), 1)[0])


def _nonlinear_rows(X, kappa, p, n):
    out = np.zeros_like(X)
    for j in range(X.shape[0]):
        out[j, n:] = nonlinear_term(X[j, :n], kappa, p)
    return out


def _hold_integrals(Nrows, s, h, rate):
    """Product integrals for a piecewise-linear nonlinearity.

    Returns ``K[j] = int_{s_j}^inf N`` and ``J[j] = int_{s_j}^inf e^{-(s'-s_j)} N``
    with exponential tails beyond the last node.
    """
    m = len(s)
    K = np.zeros_like(Nrows)
    J = np.zeros_like(Nrows)
    if not np.any(Nrows):
        return K, J
    if not rate < 0.0:
        raise TailDivergenceError(f"integrand does not decay (fitted rate {rate:.3g})")
    K[-1] = Nrows[-1] / (-rate)
    J[-1] = Nrows[-1] / (1.0 - rate)
    e = np.exp(-h)
    wa = 1.0 - e
    wb = (1.0 - e * (1.0 + h)) / h
    for j in range(m - 2, -1, -1):
        dN = Nrows[j + 1] - Nrows[j]
        K[j] = K[j + 1] + 0.5 * h * (Nrows[j] + Nrows[j + 1])
        J[j] = e * J[j + 1] + wa * Nrows[j] + wb * dN
    return K, J


def correction_term(f, trace: EvolutionTrace, params: ModelParams, d, split: SpectralSplit,
                    tol_tail=1e-10, nonlinear_rows=None):
    """``C_d(f, q) = Pfull f + P0 int_0^inf N(q) + P1 int_0^inf e^{-s} N(q)``.

    Integrals use composite Simpson on the trace grid plus an exponential
    tail from the decay rate of ``||N(q(s))||`` on the last third of the
    trace. Returns ``(C, info)``.
    """
    disc = trace.disc
    x = _as_stack(f, disc)
    n = disc.n
    s = trace.s
    if nonlinear_rows is None:
        kappa = kappa_d(disc.points, params, d)
        nonlinear_rows = _nonlinear_rows(trace.states, kappa, params.p, n)
    Nn = np.linalg.norm(nonlinear_rows, axis=1)
    C = split.Pfull.matrix @ x
    info = {"tail0": 0.0, "tail1": 0.0, "rate": None}
    if np.any(Nn > 0.0):
        rate = _tail_rate(Nn, s)
        info["rate"] = rate
        if not rate < 0.0:
            raise TailDivergenceError(f"nonlinearity does not decay along the trace (rate {rate:.3g})")
        I0 = simpson(nonlinear_rows, x=s, axis=0) + nonlinear_rows[-1] / (-rate)
        ew = np.exp(-s)[:, None] * nonlinear_rows
        I1 = simpson(ew, x=s, axis=0) + ew[-1] / (1.0 - rate)
        info["tail0"] = float(np.linalg.norm(nonlinear_rows[-1]) / (-rate))
        info["tail1"] = float(np.linalg.norm(ew[-1]) / (1.0 - rate))
        if max(info["tail0"], info["tail1"]) > tol_tail * max(1.0, float(np.linalg.norm(I0))):
            log.info("correction tail %.3e exceeds tol_tail", max(info["tail0"], info["tail1"]))
        C = C + split.P0.matrix @ I0 + split.P1.matrix @ I1
    return C, info


def weighted_sup_norm(X, s, omega0, disc):
    """``sup_s e^{-omega0 s} ||q(s)||``."""
    return float(np.max(np.exp(-omega0 * np.asarray(s)) * state_norms(X, disc)))


@dataclass(frozen=True)
class _Propagators:
    E: np.ndarray
    P1h: np.ndarray
    P2h: np.ndarray
    Q: np.ndarray


def _propagators(G, split, h):
    n2 = G.size
    Z = np.zeros((3 * n2, 3 * n2))
    Z[:n2, :n2] = h * G.matrix
    Z[:n2, n2:2 * n2] = np.eye(n2)
    Z[n2:2 * n2, 2 * n2:] = np.eye(n2)
    X = sla.expm(Z)
    E = X[:n2, :n2]
    phi1 = X[:n2, n2:2 * n2]
    phi2 = X[:n2, 2 * n2:]
    Q = np.eye(n2) - split.Pfull.matrix
    return _Propagators(Q @ E @ Q, h * Q @ phi1, h * Q @ phi2, Q)


def stabilized_fixed_point(f, params: ModelParams, d=None, disc=None, horizon=15.0, h=0.025,
                           tol_fp=1e-12, max_iter=30, delta=0.05, C=2.0, G=None, split=None,
                           check_size=True) -> StabilizedSolution:
    """Fixed point of the corrected Duhamel map on ``[0, horizon]``.

    The iterate is split along ``I = (I - Pfull) + P1 + P0``: the stable part
    is propagated by an exponential integrator with a first-order hold on
    ``N``, while the unstable parts are the tails
    ``P1 q(s) = -P1 int_s^inf e^{s-s'} N`` and ``P0 q(s) = -P0 int_s^inf N``
    left by the correction. Iteration stops when successive trajectories
    differ by at most ``tol_fp`` in ``sup_s e^{-omega0 s} ||.||``.
    """
    if G is None:
        G = assemble_generator(params, d, disc)
    disc = G.disc
    split = spectral_split(G) if split is None else split
    x0 = _as_stack(f, disc)
    fnorm = float(state_norms(x0, disc)[0])
    if check_size and fnorm > delta / C:
        raise PreconditionError(f"||f|| = {fnorm:.3e} exceeds delta/C = {delta / C:.3e}")
    n = disc.n
    m = int(round(horizon / h))
    s = h * np.arange(m + 1)
    prop = _propagators(G, split, h)
    kappa = kappa_d(disc.points, params, G.d)
    w0 = params.omega0
    P0, P1 = split.P0.matrix, split.P1.matrix

    lin = np.empty((m + 1, x0.size))
    lin[0] = prop.Q @ x0
    for j in range(m):
        lin[j + 1] = prop.E @ lin[j]

    X = lin.copy()
    Nrows = np.zeros_like(X)
    ratios, diffs = [], []
    it = 0
    for it in range(1, max_iter + 1):
        Nrows = _nonlinear_rows(X, kappa, params.p, n)
        if not np.all(np.isfinite(Nrows)):
            raise OverflowFailure("non-finite nonlinearity during Picard iteration")
        Xn = lin.copy()
        if np.any(Nrows):
            rate = _tail_rate(np.linalg.norm(Nrows, axis=1), s)
            K, J = _hold_integrals(Nrows, s, h, rate)
            acc = np.zeros(x0.size)
            for j in range(1, m + 1):
                acc = prop.E @ acc + prop.P1h @ Nrows[j - 1] + prop.P2h @ (Nrows[j] - Nrows[j - 1])
                Xn[j] += acc
            Xn -= K @ P0.T + J @ P1.T
        diff = weighted_sup_norm(Xn - X, s, w0, disc)
        X = Xn
        diffs.append(diff)
        if len(diffs) >= 2 and diffs[-2] > 0:
            ratios.append(diff / diffs[-2])
            if ratios[-1] >= 1.0 and diff > tol_fp:
                raise ContractionFailureError("Picard iteration does not contract", ratios)
        if diff <= tol_fp:
            break
    else:
        raise ContractionFailureError(f"no convergence in {max_iter} iterations", ratios)

    Nrows = _nonlinear_rows(X, kappa, params.p, n)
    corr = split.Pfull.matrix @ x0
    if np.any(Nrows):
        rate = _tail_rate(np.linalg.norm(Nrows, axis=1), s)
        K, J = _hold_integrals(Nrows, s, h, rate)
        corr = corr + P0 @ K[0] + P1 @ J[0]
    a1, a0 = _amplitudes(X, split, params.N)
    trace = EvolutionTrace(s, state_norms(X, disc), a1, a0, np.full(m, h), False, X, disc,
                           {"method": "stabilized", "h": h})
    return StabilizedSolution(trace, corr, it, ratios, x0, Nrows,
                              {"diffs": diffs, "f_norm": fnorm, "G": G, "split": split})


def duhamel_residual(sol: StabilizedSolution, checkpoints):
    """Recompute ``q(s_j) = E(s_j)(f - C) + sum_i E(s_j - s_i) [hold terms]`` directly.

    This uses the plain (unsplit) Duhamel formula with fresh matrix
    exponentials, so it is an independent check of the split iteration.
    Returns the largest state-norm mismatch over the checkpoint indices.
    """
    G = sol.meta["G"]
    tr = sol.trace
    h = float(tr.s[1] - tr.s[0])
    n2 = G.size
    Z = np.zeros((3 * n2, 3 * n2))
    Z[:n2, :n2] = h * G.matrix
    Z[:n2, n2:2 * n2] = np.eye(n2)
    Z[n2:2 * n2, 2 * n2:] = np.eye(n2)
    XZ = sla.expm(Z)
    Eh, p1, p2 = XZ[:n2, :n2], h * XZ[:n2, n2:2 * n2], h * XZ[:n2, 2 * n2:]
    Nr = sol.nonlinear
    worst = 0.0
    base = sol.data - sol.correction
    for j in checkpoints:
        j = int(j)
        q = sla.expm(tr.s[j] * G.matrix) @ base
        acc = np.zeros(n2)
        for i in range(1, j + 1):
            acc = Eh @ acc + p1 @ Nr[i - 1] + p2 @ (Nr[i] - Nr[i - 1])
        q = q + acc
        worst = max(worst, float(state_norms(q - tr.states[j], tr.disc)[0]))
    return worst
