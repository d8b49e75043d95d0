"""Command line: ``blowlab <experiment> --config <path> [--key value ...]``.

The config file is flat ``key = value`` text; ``#`` starts a comment. Every
key may also be given as a flag (``--d_list 0.2,0.4`` or ``--d-list ...``)
and flags win over the file. The environment variable ``BLOWLAB_OUT``
overrides the output directory.

Exit codes: 0 when the verdict is PASS, 2 when it is FAIL, 1 on any error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import BlowlabError
from .experiments import DEFAULT_KNOBS, EXPERIMENTS, run_experiment
from .params import make_params
from .report import emit_report

__all__ = ["main", "parse_config_text", "build_config", "run"]

PARAM_KEYS = ("N", "p", "k", "R", "d0", "omega0")

_INT_KEYS = {"N", "k", "M", "ell_max", "box_M", "seed", "n_samples"}
_VEC_KEYS = {"d0", "d"}
_BOOL_KEYS = {"plots"}
_STR_KEYS = {"out"}

_RANGES = {
    "M": (8, 512),
    "ell_max": (0, 64),
    "box_M": (8, 64),
    "n_samples": (1, 1000),
    "seed": (0, 2**32 - 1),
}


class ConfigError(BlowlabError, ValueError):
    """Malformed or out-of-range configuration."""


def parse_config_text(text):
    """Parse flat ``key = value`` lines into a dict of raw strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def _parse_vec(text):
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _parse_dlist(text, N):
    chunks = [c for c in text.replace(" ", "").split(";") if c]
    if N == 1 and len(chunks) == 1:
        return [[v] for v in _parse_vec(chunks[0])]
    return [_parse_vec(c) for c in chunks]


def _convert(key, raw, N):
    try:
        if key in _INT_KEYS:
            val = int(raw)
        elif key in _VEC_KEYS:
            val = _parse_vec(raw)
        elif key == "d_list":
            val = _parse_dlist(raw, N)
        elif key in _BOOL_KEYS:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            val = low in ("true", "1", "yes")
        elif key in _STR_KEYS:
            val = raw
        else:
            val = float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from None
    if key in _RANGES:
        lo, hi = _RANGES[key]
        if not lo <= val <= hi:
            raise ConfigError(f"{key} = {val} outside the documented range [{lo}, {hi}]")
    if isinstance(val, float) and key.startswith("tol") and not val > 0:
        raise ConfigError(f"{key} must be positive")
    return val


def build_config(raw):
    """Split raw strings into model parameters and knobs, rejecting unknown keys."""
    unknown = sorted(set(raw) - set(PARAM_KEYS) - set(DEFAULT_KNOBS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    N = int(raw.get("N", 1))
    pvals = {k: _convert(k, raw[k], N) for k in PARAM_KEYS if k in raw}
    knobs = {k: _convert(k, raw[k], N) for k in raw if k not in PARAM_KEYS}
    if "d0" in pvals and len(pvals["d0"]) == 1:
        pvals["d0"] = pvals["d0"][0]
    params = make_params(**pvals)
    return params, knobs


def _split_overrides(extra):
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"flag {tok} needs a value")
            val = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = val
    return out


def run(experiment, raw):
    """Run one experiment from raw config strings; returns the exit code."""
    params, knobs = build_config(raw)
    out = os.environ.get("BLOWLAB_OUT") or knobs.get("out") or os.path.join("blowlab_out", experiment)
    res = run_experiment(experiment, params, knobs)
    files = emit_report(res, out, plots=res.knobs.get("plots", True))
    print(f"{experiment}: {res.verdict} ({len(files)} files in {out})")
    return 0 if res.verdict == "PASS" else 2


def main(argv=None):
    ap = argparse.ArgumentParser(prog="blowlab", description=__doc__.split("\n\n")[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS))
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--verbose", action="store_true")
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = {}
        if args.config:
            with open(args.config) as fh:
                raw.update(parse_config_text(fh.read()))
        raw.update(_split_overrides(extra))
        return run(args.experiment, raw)
    except (BlowlabError, ValueError, OSError, NotImplementedError, RuntimeError) as exc:
        print(f"blowlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
