import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from blowlab.discretization import StateVector, build_disc, sobolev_norm
from blowlab.errors import CapabilityError, DegenerateInputError
from blowlab.operator import (apply_generator, assemble_generator, eigen_equation_residual,
                              symmetry_residual)
from blowlab.params import make_params, potential_V
from blowlab.spectrum import eigendecompose, filter_stable_eigs

P = make_params(N=1, p=3, k=1)
P3 = make_params(N=3, p=5, k=2)


def _const_state(disc, a, b):
    return StateVector(a * np.ones(disc.n), b * np.ones(disc.n), disc)


def test_generator_on_constant_first_component():
    disc = build_disc("interval", 16)
    out = apply_generator(assemble_generator(P, 0.0, disc), _const_state(disc, 1, 0))
    assert_allclose(out.q1, -1.0, atol=1e-12)
    assert_allclose(out.q2, 6.0, atol=1e-12)


def test_generator_on_constant_second_component():
    disc = build_disc("interval", 16)
    out = apply_generator(assemble_generator(P, 0.0, disc), _const_state(disc, 0, 1))
    assert_allclose(out.q1, 1.0, atol=1e-12)
    assert_allclose(out.q2, -2.0, atol=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.5])
def test_potential_block_is_the_only_difference(d):
    disc = build_disc("interval", 20)
    G = assemble_generator(P, d, disc)
    F = assemble_generator(P, d, disc, with_potential=False)
    n = disc.n
    assert np.array_equal(F.matrix, G.free)
    rebuilt = F.matrix.copy()
    rebuilt[n:, :n] += np.diag(potential_V(disc.nodes, P, d))
    assert np.array_equal(rebuilt, G.matrix)
    diff = G.matrix - F.matrix
    diff[n:, :n] = 0.0
    assert not diff.any()


def test_zero_maps_to_zero():
    disc = build_disc("interval", 16)
    out = apply_generator(assemble_generator(P, 0.3, disc), StateVector.zeros(disc))
    assert not out.q1.any() and not out.q2.any()


def test_dimension_mismatch():
    G = assemble_generator(P, 0.0, build_disc("interval", 16))
    with pytest.raises(ValueError):
        apply_generator(G, StateVector.zeros(build_disc("interval", 20)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    disc = build_disc("interval", 16)
    G = assemble_generator(P, 0.2, disc)
    rng = np.random.default_rng(seed)
    f = StateVector.from_stack(rng.normal(size=2 * disc.n), disc)
    g = StateVector.from_stack(rng.normal(size=2 * disc.n), disc)
    lhs = apply_generator(G, a * f + b * g).stack()
    rhs = (a * apply_generator(G, f) + b * apply_generator(G, g)).stack()
    scale = 1.0 + np.max(np.abs(apply_generator(G, f).stack())) + np.max(np.abs(apply_generator(G, g).stack()))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale * (1 + abs(a) + abs(b))


@pytest.mark.parametrize("d", [0.0, 0.4])
def test_matches_differential_expression(d):
    # f = (y^2, y): hand-differentiated right-hand side
    disc = build_disc("interval", 32)
    y = disc.nodes
    s = P.s_p
    out = apply_generator(assemble_generator(P, d, disc), StateVector(y**2, y.copy(), disc))
    top = -2 * y**2 - s * y**2 + y
    bottom = 2.0 + potential_V(y, P, d) * y**2 - y - (s + 1) * y
    inner = slice(1, -1)
    assert np.max(np.abs(out.q1 - top)[inner]) <= 1e-10
    assert np.max(np.abs(out.q2 - bottom)[inner]) <= 1e-10


def test_symmetry_residual_at_rest():
    res0, res1 = symmetry_residual(P, 0.0, build_disc("interval", 32))
    assert max(res0) <= 1e-10 and res1 <= 1e-10


def test_symmetry_residual_boosted():
    res0, res1 = symmetry_residual(P, 0.5, build_disc("interval", 48))
    assert max(res0) <= 1e-8 and res1 <= 1e-8


def test_symmetry_residual_converges_with_M():
    # in the truncation-dominated regime the residual decreases under refinement
    r = [symmetry_residual(P, 0.8, build_disc("interval", M)) for M in (16, 24, 32, 48, 64)]
    r0 = [max(a) for a, _ in r]
    r1 = [b for _, b in r]
    assert all(b < a for a, b in zip(r0, r0[1:]))
    assert all(b < a for a, b in zip(r1, r1[1:]))
    assert r1[-1] <= r1[2] * 1e-4


def test_symmetry_residual_roundoff_floor():
    r64 = symmetry_residual(P, 0.5, build_disc("interval", 64))
    assert max(r64[0]) <= 1e-9 and r64[1] <= 1e-9


def test_symmetry_residual_radial():
    secs = [build_disc("radial", 24, N=3, ell=ell) for ell in (0, 1)]
    _, res1 = symmetry_residual(P3, 0.0, secs[0])
    res0, none = symmetry_residual(P3, 0.0, secs[1])
    assert res1 <= 1e-10
    assert none is None and len(res0) == 3 and max(res0) <= 1e-10


def test_eigen_residual_constant_is_growing_mode():
    disc = build_disc("interval", 32)
    assert eigen_equation_residual(np.ones(disc.n), 1.0, P, 0.0, disc) <= 1e-12


def test_eigen_residual_linear_is_zero_mode():
    disc = build_disc("interval", 32)
    assert eigen_equation_residual(disc.nodes.copy(), 0.0, P, 0.0, disc) <= 1e-12


def test_eigen_residual_direct_substitution():
    disc = build_disc("interval", 32)
    assert_allclose(eigen_equation_residual(np.ones(disc.n), 0.5, P, 0.0, disc), 2.25, rtol=1e-12)


def test_eigen_residual_radial_modes():
    d0 = build_disc("radial", 20, N=3, ell=0)
    d1 = build_disc("radial", 20, N=3, ell=1)
    # the 1/r term of the sector Laplacian costs a little roundoff near the origin
    assert eigen_equation_residual(np.ones(d0.n), 1.0, P3, 0.0, d0) <= 1e-10
    assert eigen_equation_residual(np.ones(d1.n), 0.0, P3, 0.0, d1) <= 1e-10


def test_eigen_residual_degenerate():
    disc = build_disc("interval", 16)
    with pytest.raises(DegenerateInputError):
        eigen_equation_residual(np.zeros(disc.n), 1.0, P, 0.0, disc)


def test_capability_errors():
    with pytest.raises(CapabilityError, match="pullback"):
        assemble_generator(P3, [0.1, 0, 0], build_disc("radial", 16, N=3))
    with pytest.raises(CapabilityError):
        assemble_generator(P3, 0.0, build_disc("box", 8, N=3))
    with pytest.raises(CapabilityError):
        assemble_generator(P, 0.0, build_disc("radial", 16, N=3))


@pytest.mark.parametrize("M", [24, 32, 48])
@pytest.mark.parametrize("target", [1.0, 0.0])
@pytest.mark.parametrize("eta", [0.0, 1e-6, 1e-4])
def test_first_to_second_order_consistency(M, target, eta):
    disc = build_disc("interval", M)
    G = assemble_generator(P, 0.4, disc)
    rep = eigendecompose(G)
    i = np.argmin(np.abs(rep.eigenvalues - target))
    lam = rep.eigenvalues[i].real
    v = rep.right[:, i].real
    v = v / np.max(np.abs(v))
    v[:disc.n] += eta * np.polynomial.chebyshev.chebval(disc.nodes, [0.3, -1.0, 0.5, 0.2, -0.7])
    eps = (sobolev_norm(StateVector.from_stack(G.matrix @ v - lam * v, disc))
           / sobolev_norm(StateVector.from_stack(v, disc)))
    assert eigen_equation_residual(v[:disc.n], lam, P, 0.4, disc) <= 10 * eps + 1e-13


def _stable_free_eigs(params, disc_a, disc_b):
    a = eigendecompose(assemble_generator(params, 0.0, disc_a, with_potential=False))
    b = eigendecompose(assemble_generator(params, 0.0, disc_b, with_potential=False))
    rep = filter_stable_eigs(a, b, 1e-6)
    return rep.eigenvalues[rep.stable]


def test_free_abscissa_interval():
    lam = _stable_free_eigs(P, build_disc("interval", 32), build_disc("interval", 64))
    bound = -P.s_p + max(P.N / 2 - P.k, 0) + 0.1
    assert lam.size > 0
    assert np.max(lam.real) <= bound


def test_free_abscissa_radial():
    bound = -P3.s_p + max(P3.N / 2 - P3.k, 0) + 0.1
    for ell in range(3):
        lam = _stable_free_eigs(P3, build_disc("radial", 24, N=3, ell=ell),
                                build_disc("radial", 48, N=3, ell=ell))
        assert lam.size == 0 or np.max(lam.real) <= bound
