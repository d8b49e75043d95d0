"""Scaled profiles either stay on the profile, blow up early, or decay.

The sign of b* = 1/T* - 1 predicts the outcome, and a direct evolution run
confirms it.
"""
import numpy as np

from blowlab.discretization import build_disc
from blowlab.params import kappa_d, make_params
from blowlab.shooting import classify_trapping

P = make_params(N=1, p=3, k=1, d0=0.3)
disc = build_disc("interval", 48)
for h in (0.0, 1e-3, -1e-3):
    U = (lambda y, h=h: (1 + h) * kappa_d(y, P, 0.3), lambda y: 0 * np.asarray(y))
    rec = classify_trapping(U, P, disc)
    print(f"scale 1{h:+.0e}: b* = {rec.b_star:+.3e}, predicted {rec.classification}, "
          f"direct run {rec.observed}")
