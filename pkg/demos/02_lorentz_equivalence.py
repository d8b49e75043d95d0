"""Boosted profiles share the spectrum of the unboosted one.

The table pairs eigenvalues at d with those at d = 0, and the pushforward
residual checks that transported eigenfunctions solve the boosted problem.
"""
from blowlab.params import make_params
from blowlab.spectrum import resolvent_proxy, spectral_equivalence_check
from blowlab.discretization import build_disc
from blowlab.operator import assemble_generator

P = make_params(N=1, p=3, k=1, omega0=-0.4)
tab = spectral_equivalence_check(P, [0.2, 0.4, 0.6], M=48, omega_cmp=-0.5)
for r in tab.rows:
    print(f"d = {r['d']}: {r['lambda_d'].real:+.12f} vs {r['lambda_0'].real:+.12f}")
print(f"max mismatch {tab.max_mismatch:.2e}")
for r in tab.pushforward:
    print(f"transported eigenfunction lambda = {r['lambda']} at d = {r['d']}: residual {r['residual']:.2e}")
for d in (0.0, 0.4):
    G = assemble_generator(P, d, build_disc("interval", 48))
    print(f"min singular value of (G - z) on Re z = omega0, d = {d}: {resolvent_proxy(G, P.omega0):.4f}")
