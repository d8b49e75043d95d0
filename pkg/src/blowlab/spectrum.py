"""Point spectrum of the discrete generators, Riesz projections and spectral equivalence.

Eigenvalues are computed with a dense nonsymmetric solver (LAPACK ``geev``:
balancing, Hessenberg reduction, shifted QR). Collocation produces spurious
eigenvalues far in the left half-plane, so every verdict is based on
eigenvalues that persist when the resolution is doubled.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import BarycentricInterpolator

from .discretization import (Discretization, build_disc, harmonic_dimension, interpolate,
                             radial_sectors)
from .errors import CapabilityError, ConditioningError, NumericalFailureError
from .lorentz import eigenfunction_pullback
from .operator import GeneratorMatrix, assemble_generator, eigen_equation_residual
from .params import ModelParams, symmetry_modes

__all__ = [
    "SpectrumReport",
    "Projector",
    "SpectralSplit",
    "VerdictRecord",
    "EquivalenceTable",
    "eigendecompose",
    "filter_stable_eigs",
    "cluster_eigenvalues",
    "mode_stability_verdict",
    "riesz_projectors",
    "spectral_split",
    "riesz_projector_contour",
    "spectral_equivalence_check",
    "resolvent_proxy",
]


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residuals: np.ndarray
    stable: np.ndarray
    defective: np.ndarray
    generator: GeneratorMatrix | None = None
    meta: dict = field(default_factory=dict)

    def unstable(self, omega0, tol=1e-6):
        """Clusters of resolution-stable eigenvalues with ``Re >= omega0``, by decreasing ``Re``."""
        lam = self.eigenvalues[self.stable]
        lam = lam[lam.real >= omega0]
        return cluster_eigenvalues(lam, tol)


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray
    target: tuple
    rank: int

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Riesz projections for ``{0, 1}`` plus coordinates along the symmetry modes.

    ``amplitudes(q)`` returns ``(a1, a0)`` with
    ``P1 q = a1 f_1`` and ``P0 q = sum_i a0[i] f_{0,i}``.
    """
    P0: Projector
    P1: Projector
    Pfull: Projector
    coords1: np.ndarray
    coords0: np.ndarray
    mode1: np.ndarray
    modes0: np.ndarray

    def amplitudes(self, q):
        q = np.asarray(q)
        return self.coords1 @ q, self.coords0 @ q


@dataclass(frozen=True, eq=False)
class VerdictRecord:
    passed: bool
    unstable: list
    table: list
    params: ModelParams
    d: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class EquivalenceTable:
    rows: list
    max_mismatch: float
    unmatched: list
    pushforward: list


def _as_matrix(G):
    return G.matrix if isinstance(G, GeneratorMatrix) else np.asarray(G)


def eigendecompose(G) -> SpectrumReport:
    """Full eigendecomposition with left/right vectors and residual norms."""
    A = _as_matrix(G)
    if not np.all(np.isfinite(A)):
        raise NumericalFailureError("generator has non-finite entries")
    try:
        lam, wl, vr = sla.eig(A, left=True, right=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"QR iteration did not converge: {exc}") from exc
    vn = np.linalg.norm(vr, axis=0)
    res = np.linalg.norm(A @ vr - vr * lam, axis=0) / vn
    overlap = np.abs(np.sum(np.conj(wl) * vr, axis=0)) / (vn * np.linalg.norm(wl, axis=0))
    return SpectrumReport(lam, vr, wl, res, np.ones(lam.size, bool), overlap < 1e-8,
                          G if isinstance(G, GeneratorMatrix) else None,
                          {"overlap": overlap})


def filter_stable_eigs(report_M: SpectrumReport, report_2M: SpectrumReport,
                       tol_match=1e-6) -> SpectrumReport:
    """Keep eigenvalues of ``report_M`` that reappear in ``report_2M`` within ``tol_match``."""
    a = report_M.eigenvalues
    b = report_2M.eigenvalues
    dist = np.min(np.abs(a[:, None] - b[None, :]), axis=1)
    meta = dict(report_M.meta, match_distance=dist)
    return replace(report_M, stable=dist <= tol_match, meta=meta)


def cluster_eigenvalues(lam, tol=1e-6):
    """Group eigenvalues closer than ``tol``; returns ``[(center, multiplicity)]`` by decreasing ``Re``."""
    lam = np.asarray(lam)
    order = np.argsort(-lam.real, kind="stable")
    clusters = []
    for z in lam[order]:
        for c in clusters:
            if abs(z - c[0] / c[1]) <= tol:
                c[0] += z
                c[1] += 1
                break
        else:
            clusters.append([z, 1])
    return [(c[0] / c[1], c[1]) for c in clusters]


def _report_pair(params, d, disc_M, disc_2M, tol_match):
    rM = eigendecompose(assemble_generator(params, d, disc_M))
    r2 = eigendecompose(assemble_generator(params, d, disc_2M))
    return filter_stable_eigs(rM, r2, tol_match)


def _table_rows(report, sector=None, weight=1):
    rows = []
    for i, z in enumerate(report.eigenvalues):
        rows.append({"re": float(z.real), "im": float(z.imag),
                     "residual": float(report.residuals[i]),
                     "stable_flag": bool(report.stable[i]),
                     "multiplicity": weight, "sector": sector})
    return rows


def mode_stability_verdict(params: ModelParams, d=None, M=48, ell_max=8,
                           tol_eig=1e-6, tol_match=1e-6) -> VerdictRecord:
    """PASS iff the resolution-stable eigenvalues with ``Re >= omega0`` are exactly ``{0, 1}``.

    The expected multiplicities are ``N`` for ``0`` and ``1`` for ``1``. For
    ``N >= 2`` (``d = 0`` only) the count runs over harmonic sectors, each
    sector eigenvalue weighted by the number of harmonics of that degree.
    """
    d = params.boost(d)
    w0 = params.omega0
    found = {}
    table = []
    if params.N == 1:
        rep = _report_pair(params, d, build_disc("interval", M, params.R, params.k),
                           build_disc("interval", 2 * M, params.R, params.k), tol_match)
        table += _table_rows(rep)
        for z, m in rep.unstable(w0, tol_eig):
            found.setdefault(complex(z), []).append((None, m))
    else:
        if np.any(d != 0.0):
            raise CapabilityError("mode stability for N >= 2 is computed at d = 0 only; "
                                  "use spectral_equivalence_check for d != 0")
        for disc_M, disc_2M in zip(radial_sectors(M, params.R, params.k, params.N, ell_max),
                                   radial_sectors(2 * M, params.R, params.k, params.N, ell_max)):
            rep = _report_pair(params, d, disc_M, disc_2M, tol_match)
            weight = harmonic_dimension(disc_M.ell, params.N)
            table += _table_rows(rep, disc_M.ell, weight)
            for z, m in rep.unstable(w0, tol_eig):
                key = next((k for k in found if abs(k - z) <= tol_eig), complex(z))
                found.setdefault(key, []).append((disc_M.ell, m * weight))
    unstable = []
    for z, parts in found.items():
        unstable.append({"lambda": z, "multiplicity": sum(m for _, m in parts),
                         "sectors": [s for s, _ in parts]})
    unstable.sort(key=lambda r: -r["lambda"].real)
    expected = {1.0: 1, 0.0: params.N}
    passed = len(unstable) == 2
    for row in unstable:
        target = min(expected, key=lambda t: abs(row["lambda"] - t))
        if abs(row["lambda"] - target) > tol_eig or row["multiplicity"] != expected[target]:
            passed = False
        if params.N > 1 and row["sectors"] != [0 if target == 1.0 else 1]:
            passed = False
    return VerdictRecord(passed, unstable, table, params, d,
                         {"M": M, "ell_max": ell_max if params.N > 1 else None,
                          "tol_eig": tol_eig, "tol_match": tol_match})


def _cluster_projector(report, target, radius, rank, cond_min):
    lam = report.eigenvalues
    idx = np.flatnonzero(np.abs(lam - target) < radius)
    if idx.size != rank:
        raise ConditioningError(
            f"expected {rank} eigenvalue(s) near {target}, found {idx.size}: {lam[idx]}")
    V = report.right[:, idx]
    W = report.left[:, idx]
    V = V / np.linalg.norm(V, axis=0)
    W = W / np.linalg.norm(W, axis=0)
    S = W.conj().T @ V
    smin = np.linalg.svd(S, compute_uv=False).min()
    if smin < cond_min:
        raise ConditioningError(
            f"left/right eigenvectors near {target} are nearly orthogonal (sigma_min = {smin:.3e})")
    P = V @ np.linalg.solve(S, W.conj().T)
    if np.max(np.abs(P.imag)) < 1e-8 * max(1.0, np.max(np.abs(P.real))):
        P = P.real
    return P, V, W


def riesz_projectors(report: SpectrumReport, params: ModelParams, radius=None,
                     rank0=None, cond_min=1e-10):
    """Spectral projectors ``(P0, P1, Pfull)`` from bi-orthogonalized eigenvectors."""
    radius = min(abs(params.omega0) / 2.0, 0.25) if radius is None else radius
    rank0 = params.N if rank0 is None else rank0
    P0, _, _ = _cluster_projector(report, 0.0, radius, rank0, cond_min)
    P1, _, _ = _cluster_projector(report, 1.0, radius, 1, cond_min)
    return (Projector(P0, (0.0,), rank0), Projector(P1, (1.0,), 1),
            Projector(P0 + P1, (0.0, 1.0), rank0 + 1))


def spectral_split(G: GeneratorMatrix, report: SpectrumReport | None = None,
                   radius=None) -> SpectralSplit:
    """Projectors plus amplitude coordinates along the symmetry modes (interval only)."""
    params, disc = G.params, G.disc
    if disc.geometry != "interval":
        raise CapabilityError("symmetry-mode coordinates are built on the interval")
    report = eigendecompose(G) if report is None else report
    radius = min(abs(params.omega0) / 2.0, 0.25) if radius is None else radius
    P0, V0, W0 = _cluster_projector(report, 0.0, radius, params.N, 1e-10)
    P1, V1, W1 = _cluster_projector(report, 1.0, radius, 1, 1e-10)
    modes0, mode1 = symmetry_modes(params, G.d, disc.points)
    F0 = np.stack([m.values.reshape(-1) for m in modes0], axis=1)
    f1 = mode1.values.reshape(-1)
    c0 = np.linalg.solve(W0.conj().T @ F0, W0.conj().T)
    c1 = (W1.conj().T / (W1.conj().T @ f1)).reshape(-1)
    c0 = c0.real if np.max(np.abs(c0.imag)) < 1e-12 * np.max(np.abs(c0)) else c0
    c1 = c1.real if np.max(np.abs(c1.imag)) < 1e-12 * np.max(np.abs(c1)) else c1
    return SpectralSplit(Projector(P0, (0.0,), params.N), Projector(P1, (1.0,), 1),
                         Projector(P0 + P1, (0.0, 1.0), params.N + 1),
                         c1, c0, f1, F0)


def riesz_projector_contour(G, center, radius, n_points=64):
    """Trapezoid-rule approximation of ``(2 pi i)^-1 \\oint (z - G)^-1 dz`` on a circle."""
    A = _as_matrix(G)
    n = A.shape[0]
    P = np.zeros((n, n), dtype=complex)
    I = np.eye(n)
    for th in 2.0 * np.pi * np.arange(n_points) / n_points:
        e = radius * np.exp(1j * th)
        P += e * np.linalg.solve((center + e) * I - A, I)
    P /= n_points
    return P.real if np.max(np.abs(P.imag)) < 1e-8 else P


def _stable_eigs(params, d, M, tol_match):
    return _report_pair(params, d, build_disc("interval", M, params.R, params.k),
                        build_disc("interval", 2 * M, params.R, params.k), tol_match)


def _pushforward_rows_interval(params, d_list, M, ref0):
    disc = build_disc("interval", M, params.R, params.k)
    rows = []
    n = disc.n
    for lam in (0.0, 1.0):
        i = int(np.argmin(np.abs(ref0.eigenvalues - lam)))
        psi_nodes = np.real(ref0.right[:n, i])
        psi_nodes = psi_nodes / np.max(np.abs(psi_nodes))
        ref_disc = ref0.generator.disc

        def psi(y, v=psi_nodes, dd=ref_disc):
            return interpolate(v, dd, y)

        for d in d_list:
            phi = eigenfunction_pullback(psi, lam, params, d, disc.nodes)
            rows.append({"d": float(np.ravel(d)[0]), "lambda": lam,
                         "residual": eigen_equation_residual(phi, lam, params, d, disc)})
    return rows


def _pushforward_rows_radial(params, d_list, M, box_M):
    """Transport the ``d = 0`` sector eigenfunctions for 0 and 1 onto a box grid."""
    box = build_disc("box", box_M, params.R, params.k, params.N)
    rows = []
    for ell, lam in ((0, 1.0), (1, 0.0)):
        disc = build_disc("radial", M, params.R, params.k, params.N, ell)
        rep = eigendecompose(assemble_generator(params, 0.0, disc))
        i = int(np.argmin(np.abs(rep.eigenvalues - lam)))
        w = np.real(rep.right[:disc.n, i])
        w = w / np.max(np.abs(w))
        w_full = np.abs(disc.extras["extend"]) @ w
        reduced = BarycentricInterpolator(disc.extras["full_nodes"], w_full, wi=disc.extras["bary"])
        comps = range(params.N) if ell == 1 else [None]
        for comp in comps:
            def psi(y, comp=comp, reduced=reduced):
                base = reduced(np.linalg.norm(y, axis=-1))
                return base if comp is None else base * y[..., comp]

            for d in d_list:
                dvec = params.boost(d)
                phi = eigenfunction_pullback(psi, lam, params, dvec, box.points)
                rows.append({"d": [float(v) for v in dvec], "lambda": lam, "component": comp,
                             "residual": eigen_equation_residual(phi, lam, params, dvec, box)})
    return rows


def spectral_equivalence_check(params: ModelParams, d_list, M=48, omega_cmp=-0.5,
                               tol_match=1e-6, box_M=20) -> EquivalenceTable:
    """Compare the resolution-stable spectrum of ``L_d`` with that of ``L_0``.

    ``N = 1`` runs two independent eigensolves per ``d`` and also transports
    the ``L_0`` eigenfunctions for 0 and 1 into each ``d`` frame. ``N >= 2``
    only has the transport route, with residuals evaluated on a box grid.
    """
    if params.N > 1:
        rows = _pushforward_rows_radial(params, d_list, M, box_M)
        return EquivalenceTable([], 0.0, [], rows)
    ref = _stable_eigs(params, 0.0, M, tol_match)
    lam0 = ref.eigenvalues[ref.stable]
    lam0 = lam0[lam0.real > omega_cmp - 0.25]
    rows, unmatched = [], []
    worst = 0.0
    for d in d_list:
        rep = _stable_eigs(params, d, M, tol_match)
        lam = rep.eigenvalues[rep.stable]
        for j in np.flatnonzero(lam.real > omega_cmp):
            z = lam[j]
            k = int(np.argmin(np.abs(lam0 - z)))
            gap = float(abs(lam0[k] - z))
            row = {"d": float(np.ravel(d)[0]), "lambda_d": complex(z), "lambda_0": complex(lam0[k]),
                   "mismatch": gap}
            rows.append(row)
            if gap > tol_match:
                unmatched.append(row)
            worst = max(worst, gap)
    push = _pushforward_rows_interval(params, d_list, M, ref)
    return EquivalenceTable(rows, worst, unmatched, push)


def resolvent_proxy(G, omega0, im_max=50.0, n_line=201, n_circle=64):
    """Smallest singular value of ``z - G`` on the boundary of the region where the
    resolvent should stay bounded: the line ``Re z = omega0`` and the circles of
    radius ``|omega0|/2`` around 0 and 1.

    For a generator on an interval or radial sector the singular values are taken
    in the discrete ``H^k x H^{k-1}`` norm, which keeps the proxy stable under
    refinement; a bare matrix uses the Euclidean norm.
    """
    A = _as_matrix(G)
    if isinstance(G, GeneratorMatrix) and G.disc.geometry != "box":
        W1, W2 = G.disc.gram
        L = np.linalg.cholesky(sla.block_diag(W1, W2))
        A = L.T @ A @ np.linalg.inv(L.T)
    I = np.eye(A.shape[0])
    zs = list(omega0 + 1j * np.linspace(-im_max, im_max, n_line))
    r = abs(omega0) / 2.0
    th = 2.0 * np.pi * np.arange(n_circle) / n_circle
    zs += list(r * np.exp(1j * th)) + list(1.0 + r * np.exp(1j * th))
    best = np.inf
    for z in zs:
        best = min(best, np.linalg.svd(z * I - A, compute_uv=False)[-1])
    return float(best)
