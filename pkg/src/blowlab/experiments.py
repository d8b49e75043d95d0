"""The numbered experiments behind the command line, as plain functions.

Each function takes validated ``ModelParams`` and a knob dict and returns an
:class:`~blowlab.report.ExperimentResult` whose verdict is ``"PASS"`` or
``"FAIL"``; every verdict is backed by rows in one of its tables.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .discretization import build_disc
from .evolution import evolve_linear, fit_decay_rate, stabilized_fixed_point, state_norms
from .lorentz import boost_selfsim, make_chart
from .operator import assemble_generator, symmetry_residual
from .params import ModelParams, kappa_d
from .report import ExperimentResult, eigen_rows, trace_rows
from .shooting import classify_trapping, random_smooth_data, solve_parameters
from .spectrum import (mode_stability_verdict, riesz_projectors, eigendecompose,
                       resolvent_proxy, spectral_equivalence_check, spectral_split)

__all__ = ["EXPERIMENTS", "DEFAULT_KNOBS", "run_experiment"]

DEFAULT_KNOBS = {
    "M": 48,
    "ell_max": 8,
    "box_M": 16,
    "tol_eig": 1e-6,
    "tol_match": 1e-6,
    "tol_boost": 1e-12,
    "tol_sym": 1e-8,
    "tol_push": 1e-8,
    "tol_proj": 1e-9,
    "tol_semigroup": 1e-7,
    "omega_cmp": -0.5,
    "d": None,
    "d_list": None,
    "seed": 0,
    "n_samples": None,
    "s_end": None,
    "s_min": 2.0,
    "eps": 1e-4,
    "horizon": 15.0,
    "h_fp": 0.025,
    "tol_fp": 1e-12,
    "tol_shoot": 1e-8,
    "delta": 0.05,
    "C": 2.0,
    "decay_eps": 0.1,
    "h": 1e-3,
    "tol_b": 1e-6,
    "s_direct": 25.0,
    "plots": True,
    "out": None,
}


def _verdict(ok):
    return "PASS" if ok else "FAIL"


def _d_list(params, knobs, default):
    lst = knobs["d_list"]
    if lst is None:
        lst = default
    return [params.boost(d) for d in lst]


def profile_check(params: ModelParams, knobs):
    """Boost identity ``T_d kappa_d = kappa_0`` and symmetry-mode residuals."""
    ds = _d_list(params, knobs, [0.0, 0.3, 0.5, 0.6] if params.N == 1 else [0.0, 0.3])
    rows = []
    ok = True
    if params.N == 1:
        y = build_disc("interval", knobs["M"], params.R, params.k).points
    else:
        y = build_disc("box", knobs["box_M"], params.R, params.k, params.N).points
    k0 = params.kappa0
    for d in ds:
        chart = make_chart(d, params.N)
        V = boost_selfsim(lambda s, yy: kappa_d(yy, params, d), chart, params, 0.0, y)
        boost_err = float(np.max(np.abs(V - k0)))
        r0 = r1 = float("nan")
        if params.N == 1:
            disc = build_disc("interval", knobs["M"], params.R, params.k)
            res0, res1 = symmetry_residual(params, d, disc)
            r0, r1 = max(res0), res1
        elif not np.any(d):
            res = [symmetry_residual(params, d, build_disc("radial", knobs["M"], params.R,
                                                           params.k, params.N, ell))
                   for ell in (0, 1)]
            r1, r0 = res[0][1], res[1][0][0]
        good = boost_err <= knobs["tol_boost"] and not (r0 > knobs["tol_sym"]) \
            and not (r1 > knobs["tol_sym"])
        ok &= good
        rows.append([",".join(f"{v:g}" for v in d), boost_err, r0, r1, good])
    return ExperimentResult(
        "profile-check", params.as_dict(), {}, _verdict(ok),
        {"max_boost_error": max(r[1] for r in rows),
         "max_symmetry_residual": float(np.nanmax([[r[2], r[3]] for r in rows]))
         if not np.all(np.isnan([[r[2], r[3]] for r in rows])) else None},
        {"profile_check.csv": (["d", "boost_error", "res_f0", "res_f1", "pass"], rows)})


def mode_stability(params: ModelParams, knobs):
    d = params.boost(knobs["d"]) if knobs["d"] is not None else params.d0
    v = mode_stability_verdict(params, d, knobs["M"], knobs["ell_max"], knobs["tol_eig"],
                               knobs["tol_match"])
    table = v.table
    tables = {"eigenvalues.csv": eigen_rows(table)}
    unstable = [[u["lambda"].real, u["lambda"].imag, u["multiplicity"],
                 ";".join("" if s is None else str(s) for s in u["sectors"])] for u in v.unstable]
    tables["unstable.csv"] = (["re", "im", "multiplicity", "sectors"], unstable)
    stable = [r for r in table if r["stable_flag"]]
    plots = {"eigenvalues.svg": {
        "series": [("resolution-stable", [r["re"] for r in stable], [r["im"] for r in stable], "dot")],
        "title": "resolution-stable eigenvalues", "xlabel": "Re", "ylabel": "Im"}}
    return ExperimentResult(
        "mode-stability", params.as_dict(), {}, _verdict(v.passed),
        {"unstable": [{"lambda": u["lambda"], "multiplicity": u["multiplicity"],
                       "sectors": u["sectors"]} for u in v.unstable],
         "d": d, "n_stable": len(stable)},
        tables, plots)


def equivalence(params: ModelParams, knobs):
    ds = _d_list(params, knobs, [0.2, 0.4, 0.6] if params.N == 1 else [[0.4] + [0.0] * (params.N - 1)])
    if params.N == 1:
        ds_arg = [float(d[0]) for d in ds]
    else:
        ds_arg = ds
    tab = spectral_equivalence_check(params, ds_arg, knobs["M"], knobs["omega_cmp"],
                                     knobs["tol_match"], knobs["box_M"])
    matched = [[r["d"], r["lambda_d"].real, r["lambda_d"].imag, r["lambda_0"].real,
                r["lambda_0"].imag, r["mismatch"]] for r in tab.rows]
    push = [[",".join(f"{v:g}" for v in np.atleast_1d(r["d"])), r["lambda"],
             "" if r.get("component") is None else r["component"], r["residual"]]
            for r in tab.pushforward]
    worst_push = max(r["residual"] for r in tab.pushforward)
    ok = not tab.unmatched and worst_push <= knobs["tol_push"]
    metrics = {"max_mismatch": tab.max_mismatch, "n_unmatched": len(tab.unmatched),
               "max_pushforward_residual": worst_push}
    tables = {"matched_pairs.csv": (["d", "re_d", "im_d", "re_0", "im_0", "mismatch"], matched),
              "pushforward.csv": (["d", "lambda", "component", "residual"], push)}
    if params.N == 1:
        # smallest singular value of z - L_d on the contour, one row per d
        disc = build_disc("interval", knobs["M"], params.R, params.k)
        res = [[d, resolvent_proxy(assemble_generator(params, d, disc), params.omega0)]
               for d in [0.0] + ds_arg]
        tables["resolvent.csv"] = (["d", "min_singular_value"], res)
        metrics["min_resolvent_proxy"] = min(r[1] for r in res)
    return ExperimentResult("equivalence", params.as_dict(), {}, _verdict(ok), metrics, tables)


def linear_decay(params: ModelParams, knobs):
    disc = build_disc("interval", knobs["M"], params.R, params.k)
    G = assemble_generator(params, None, disc)
    rep = eigendecompose(G)
    P0, P1, Pf = riesz_projectors(rep, params)
    split = spectral_split(G, rep)
    rng = np.random.default_rng(knobs["seed"])
    n = knobs["n_samples"] or 20
    s_end = knobs["s_end"] or 10.0
    Q = np.eye(2 * disc.n) - Pf.matrix
    rows, first = [], None
    for i in range(n):
        f = random_smooth_data(rng, params, disc, 1.0)
        q0 = Q @ np.concatenate(f(disc.nodes))
        tr = evolve_linear(q0, G, s_end, split=split)
        rate, pref, r2 = fit_decay_rate(tr, knobs["s_min"])
        rows.append([i, rate, pref, r2, rate <= params.omega0 + 0.05 and r2 >= 0.99])
        first = tr if first is None else first
    idem = max(float(np.max(np.abs(P @ P - P))) for P in (P0.matrix, P1.matrix, Pf.matrix))
    semi = 0.0
    for s in np.linspace(0.25, 1.0, 4):
        E = sla.expm(s * G.matrix)
        semi = max(semi, float(np.max(np.abs(P1.matrix @ E - np.exp(s) * P1.matrix))))
    ok = all(r[-1] for r in rows) and idem <= knobs["tol_proj"] and semi <= knobs["tol_semigroup"]
    proj_rows = [["idempotence", idem, knobs["tol_proj"]], ["P1_semigroup", semi, knobs["tol_semigroup"]]]
    tables = {"decay_rates.csv": (["sample", "rate", "prefactor", "r2", "pass"], rows),
              "decay_trace.csv": trace_rows(first),
              "projector_checks.csv": (["check", "value", "tolerance"], proj_rows)}
    plots = {"decay.svg": {"series": [("sample 0", first.s, first.norms, "line")],
                           "title": "linear decay of projected data", "xlabel": "s",
                           "ylabel": "norm", "logy": True}}
    return ExperimentResult(
        "linear-decay", params.as_dict(), {}, _verdict(ok),
        {"max_rate": max(r[1] for r in rows), "min_r2": min(r[3] for r in rows),
         "idempotence": idem, "p1_semigroup": semi, "omega0": params.omega0}, tables, plots)


def nonlinear_trap(params: ModelParams, knobs):
    disc = build_disc("interval", knobs["M"], params.R, params.k)
    rng = np.random.default_rng(knobs["seed"])
    f = random_smooth_data(rng, params, disc, knobs["eps"])
    x = np.concatenate(f(disc.nodes))
    sol = stabilized_fixed_point(x, params, None, disc, knobs["horizon"], knobs["h_fp"],
                                 knobs["tol_fp"], delta=knobs["delta"], C=knobs["C"])
    tr = sol.trace
    env = 2.0 * knobs["eps"] * np.exp(params.omega0 * tr.s)
    ratio = float(np.max(tr.norms / env))
    ok = ratio <= 1.0
    return ExperimentResult(
        "nonlinear-trap", params.as_dict(), {}, _verdict(ok),
        {"iterations": sol.iterations, "bound_ratio": ratio,
         "correction_norm": float(state_norms(sol.correction, disc)[0]),
         "contraction_ratios": sol.ratios},
        {"trace.csv": trace_rows(tr)},
        {"trace.svg": {"series": [("||q(s)||", tr.s, tr.norms, "line"),
                                  ("2 eps e^(omega0 s)", tr.s, env, "line")],
                       "title": "stabilized solution", "xlabel": "s", "ylabel": "norm",
                       "logy": True}})


def shoot(params: ModelParams, knobs):
    disc = build_disc("interval", knobs["M"], params.R, params.k)
    rng = np.random.default_rng(knobs["seed"])
    n = knobs["n_samples"] or 10
    rows, first = [], None
    fp_opts = {"horizon": knobs["horizon"], "h": knobs["h_fp"], "tol_fp": knobs["tol_fp"]}
    for i in range(n):
        f = random_smooth_data(rng, params, disc, knobs["eps"])
        r = solve_parameters(f, params, disc, tol_shoot=knobs["tol_shoot"], delta=knobs["delta"],
                             C=knobs["C"], eps=knobs["decay_eps"], fp_opts=fp_opts)
        offset = abs(r.T_star - 1.0) + float(np.linalg.norm(r.d_star - params.d0))
        good = offset <= 5e-3 and r.decay_ok
        rows.append([i, r.T_star] + [float(v) for v in r.d_star]
                    + [r.iterations, float(np.max(np.abs(r.residual))), offset, r.decay_ratio, good])
        first = r if first is None else first
    header = ["sample", "T_star"] + [f"d_star_{i + 1}" for i in range(params.N)] + \
        ["iterations", "residual", "offset", "decay_ratio", "pass"]
    tr = first.trace
    env = first.meta["decay_bound"] * np.exp((-params.omega_p + knobs["decay_eps"]) * tr.s)
    return ExperimentResult(
        "shoot", params.as_dict(), {}, _verdict(all(r[-1] for r in rows)),
        {"max_offset": max(r[-3] for r in rows), "max_decay_ratio": max(r[-2] for r in rows),
         "max_residual": max(r[-4] for r in rows)},
        {"shooting.csv": (header, rows), "trace.csv": trace_rows(tr)},
        {"trace.svg": {"series": [("||q(s)|| at (T*, d*)", tr.s, tr.norms, "line"),
                                  ("bound", tr.s, env, "line")],
                       "title": "shooting: decay at the solved parameters", "xlabel": "s",
                       "ylabel": "norm", "logy": True}})


def trichotomy(params: ModelParams, knobs):
    disc = build_disc("interval", knobs["M"], params.R, params.k)
    h = knobs["h"]
    expected = {0.0: "trapped", h: "blowup-mismatch", -h: "decay-to-zero"}
    rows = []
    for hh, want in expected.items():
        def U(y, hh=hh):
            return (1.0 + hh) * kappa_d(y, params, params.d0)

        def U_s(y):
            return np.zeros_like(np.asarray(y, float))

        rec = classify_trapping((U, U_s), params, disc, tol_b=knobs["tol_b"],
                                s_direct=knobs["s_direct"], tol_shoot=knobs["tol_shoot"],
                                delta=knobs["delta"], C=knobs["C"])
        rows.append([hh, rec.b_star, rec.shooting.T_star, rec.classification, rec.observed,
                     want, rec.classification == want])
    return ExperimentResult(
        "trichotomy", params.as_dict(), {}, _verdict(all(r[-1] for r in rows)),
        {"b_star": {r[3]: r[1] for r in rows}},
        {"trichotomy.csv": (["h", "b_star", "T_star", "classification", "observed", "expected",
                             "pass"], rows)})


EXPERIMENTS = {
    "profile-check": profile_check,
    "mode-stability": mode_stability,
    "equivalence": equivalence,
    "linear-decay": linear_decay,
    "nonlinear-trap": nonlinear_trap,
    "shoot": shoot,
    "trichotomy": trichotomy,
}


def run_experiment(name, params: ModelParams, knobs=None) -> ExperimentResult:
    full = dict(DEFAULT_KNOBS)
    full.update(knobs or {})
    res = EXPERIMENTS[name](params, full)
    res.knobs = {k: v for k, v in sorted(full.items())}
    return res
