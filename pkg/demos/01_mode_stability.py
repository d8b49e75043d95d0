"""Spectrum of the linearized generator around the self-similar profile.

Eigenvalues that persist when the grid is doubled are kept; the ones with
real part above omega0 are exactly the symmetry modes 1 (time translation)
and 0 (Lorentz boost).
"""
from blowlab.params import make_params
from blowlab.spectrum import mode_stability_verdict

P = make_params(N=1, p=3, k=1, omega0=-0.4)
for d in (0.0, 0.4):
    v = mode_stability_verdict(P, d, M=48)
    print(f"d = {d}: verdict {'PASS' if v.passed else 'FAIL'}")
    for r in v.unstable:
        print(f"  lambda = {r['lambda'].real:+.12f}  multiplicity {r['multiplicity']}")

P3 = make_params(N=3, p=5, k=2)
v = mode_stability_verdict(P3, 0.0, M=24, ell_max=8)
print("N = 3, p = 5, radial sectors up to ell = 8")
for r in v.unstable:
    print(f"  lambda = {r['lambda'].real:+.10f} in sectors {r['sectors']}, multiplicity {r['multiplicity']}")
