import itertools

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from labcoupling import algebra as alg
from oracles import ad_dimension_exact, der_dimension_exact, rodrigues

EXPECTED_DIMS = {
    "abelian1": (1, 0),
    "abelian2": (4, 0),
    "abelian3": (9, 0),
    "abelian4": (16, 0),
    "so3": (3, 3),
    "sl2": (3, 3),
    "heisenberg3": (6, 2),
    "aff2": (2, 2),
}


def direct_sum(g, h):
    n, m = g.dim, h.dim
    c = np.zeros((n + m,) * 3)
    c[:n, :n, :n] = g.structure
    c[n:, n:, n:] = h.structure
    return alg.LieAlgebra(c, f"{g.name}+{h.name}")


def change_basis(g, P):
    """Structure constants in the basis ``f_i = sum_a P[a, i] e_a``."""
    Q = np.rint(np.linalg.inv(P))
    c = np.einsum("ai,bj,abk,lk->ijl", P, P, g.structure, Q)
    return alg.LieAlgebra(np.rint(c), g.name + "'")


def unimodular(rng, n):
    P = np.eye(n)
    for _ in range(3 * n):
        i, j = rng.choice(n, 2, replace=False)
        E = np.eye(n)
        E[i, j] = rng.integers(-2, 3)
        P = P @ E
    return P


def small_algebras():
    out = [alg.builtin(k) for k in alg.CATALOG]
    out += [
        direct_sum(alg.so3(), alg.abelian(1)),
        direct_sum(alg.affine2(), alg.affine2()),
        direct_sum(alg.heisenberg3(), alg.abelian(1)),
        direct_sum(alg.affine2(), alg.abelian(1)),
    ]
    rng = np.random.default_rng(7)
    for base in (alg.sl2(), alg.heisenberg3(), alg.affine2(), alg.so3()):
        out.append(change_basis(base, unimodular(rng, base.dim)))
    return out


@pytest.mark.parametrize("name", list(alg.CATALOG))
def test_builtins_are_lie_algebras(name):
    rep = alg.validate_algebra(alg.builtin(name))
    assert rep.antisymmetry <= 1e-12 and rep.jacobi <= 1e-12
    assert rep.ok


@pytest.mark.parametrize("name,dims", EXPECTED_DIMS.items())
def test_known_derivation_dimensions(name, dims):
    assert alg.derivation_space(alg.builtin(name)).dims == dims


@pytest.mark.parametrize("g", small_algebras(), ids=lambda g: g.name)
def test_derivation_dimension_matches_exact_nullspace(g):
    assert alg.validate_algebra(g).ok
    ds = alg.derivation_space(g)
    assert ds.dims == (der_dimension_exact(g.structure), ad_dimension_exact(g.structure))
    assert not ds.ambiguous


@pytest.mark.parametrize("g", small_algebras(), ids=lambda g: g.name)
def test_bases_are_derivations_and_ad_inside_der(g):
    ds = alg.derivation_space(g)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(g.structure))))
    if len(ds.der_basis):
        assert np.max(alg.derivation_residual(g, ds.der_basis)) <= 1e-10
    # each ad basis element lies in span(Der)
    B = ds.der_basis.reshape(len(ds.der_basis), -1)
    for A in ds.ad_basis:
        coef = B @ A.ravel()
        assert np.linalg.norm(A.ravel() - coef @ B) <= tol
    # centre is the kernel of ad
    if len(ds.center):
        assert np.max(np.abs(alg.ad(g, ds.center))) <= 1e-12


def test_broken_jacobi_is_reported():
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[1, 0, 2] = 1, -1
    c[1, 2, 1], c[2, 1, 1] = 1, -1
    c[0, 2, 0], c[2, 0, 0] = 1, -1
    rep = alg.validate_algebra(alg.LieAlgebra(c))
    assert rep.antisymmetry == 0
    assert rep.jacobi > 0.5 and not rep.ok


def test_from_brackets_completes_antisymmetry_and_rejects_bad_input():
    g = alg.from_brackets("t", 2, [(1, 2, [0, 1])])
    assert np.array_equal(g.structure[1, 0], [0, -1])
    with pytest.raises(alg.AlgebraError):
        alg.from_brackets("t", 2, [(1, 1, [1, 0])])
    with pytest.raises(alg.AlgebraError):
        alg.from_brackets("t", 2, [(1, 3, [1, 0])])
    with pytest.raises(alg.AlgebraError):
        alg.from_brackets("t", 2, [(1, 2, [1, 0]), (1, 2, [0, 1])])
    with pytest.raises(alg.AlgebraError):
        alg.load_algebra({"brackets": []})


def test_sl2_relations():
    g = alg.sl2()
    h, e, f = np.eye(3)
    assert np.allclose(alg.bracket(g, h, e), 2 * e)
    assert np.allclose(alg.bracket(g, h, f), -2 * f)
    assert np.allclose(alg.bracket(g, e, f), h)


vec3 = arrays(np.float64, 3, elements=st.floats(-3, 3))


@given(u=vec3, v=vec3, w=vec3, name=st.sampled_from(["so3", "sl2", "heisenberg3"]))
def test_ad_is_a_representation(u, v, w, name):
    g = alg.builtin(name)
    lhs = alg.ad(g, alg.bracket(g, u, v))
    au, av = alg.ad(g, u), alg.ad(g, v)
    assert np.allclose(lhs, au @ av - av @ au, atol=1e-10)
    assert np.allclose(alg.bracket(g, u, v), -alg.bracket(g, v, u))
    assert np.allclose(alg.ad(g, u) @ w, alg.bracket(g, u, w))


@given(u=vec3)
def test_inner_test_recovers_witness(u):
    g = alg.heisenberg3()
    ds = alg.derivation_space(g)
    dec = alg.inner_test(ds, alg.ad(g, u))
    assert dec.is_inner
    assert np.allclose(alg.ad(g, dec.witness_u), alg.ad(g, u), atol=1e-12)
    # minimal norm: no centre component
    assert abs(dec.witness_u @ ds.center[0]) <= 1e-12


def test_outer_derivation_is_not_inner():
    g = alg.heisenberg3()
    ds = alg.derivation_space(g)
    D = np.diag([1.0, 0.0, 1.0])  # scaling e1, e3
    assert alg.derivation_residual(g, D) <= 1e-15
    dec = alg.inner_test(ds, D)
    assert not dec.is_inner
    assert dec.relative_residual > 0.5


def test_exp_matches_scipy_and_rodrigues():
    rng = np.random.default_rng(3)
    for scale in (1e-3, 0.5, 3.0, 20.0):
        D = scale * rng.standard_normal((4, 4))
        ref = scipy.linalg.expm(D)
        assert np.linalg.norm(alg.exp_derivation(D) - ref) <= 1e-12 * max(1, np.linalg.norm(ref))
    g = alg.so3()
    for _ in range(10):
        w = rng.standard_normal(3) * 2
        assert np.allclose(alg.exp_derivation(alg.ad(g, w)), rodrigues(w), atol=1e-13)


def test_exp_batch_agrees_with_single():
    rng = np.random.default_rng(4)
    D = rng.standard_normal((5, 3, 3))
    batch = alg.exp_derivation(D)
    for k in range(5):
        assert np.allclose(batch[k], scipy.linalg.expm(D[k]), rtol=1e-12, atol=1e-12)


@given(arrays(np.float64, (3, 3), elements=st.floats(-0.1, 0.1)))
def test_log_inverts_exp_near_identity(X):
    assert np.allclose(alg.log_near_identity(alg.exp_derivation(X)), X, atol=1e-13)


def test_log_refuses_far_matrices():
    with pytest.raises(ValueError):
        alg.log_near_identity(3 * np.eye(2))


def random_derivation(ds, rng, bound=2.0):
    coef = rng.standard_normal(len(ds.der_basis))
    D = np.tensordot(coef, ds.der_basis, axes=1)
    return D * (rng.uniform(0, bound) / np.linalg.norm(D, 2))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(list(alg.CATALOG)))
def test_exp_of_derivation_is_automorphism(seed, name):
    g = alg.builtin(name)
    ds = alg.derivation_space(g)
    D = random_derivation(ds, np.random.default_rng(seed))
    rep = alg.is_automorphism(g, alg.exp_derivation(D))
    assert rep.ok, rep


def test_automorphism_codes():
    g = alg.so3()
    assert alg.is_automorphism(g, np.eye(3)).code is alg.AutCode.OK
    assert alg.is_automorphism(g, np.diag([2.0, 1, 1])).code is alg.AutCode.NOT_HOMOMORPHISM
    assert alg.is_automorphism(g, np.diag([1.0, 1, 0])).code is alg.AutCode.SINGULAR
    # sl2: h -> h, e -> -e, f -> -f
    assert alg.is_automorphism(alg.sl2(), np.diag([1.0, -1, -1])).ok


def test_batched_residuals_match_loop():
    g = alg.sl2()
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 3, 3))
    batch = alg.automorphism_residual(g, A)
    assert np.allclose(batch, [alg.automorphism_residual(g, a) for a in A])
    D = rng.standard_normal((6, 3, 3))
    assert np.allclose(alg.derivation_residual(g, D), [alg.derivation_residual(g, d) for d in D])


def test_inner_cosets():
    g = alg.heisenberg3()
    ds = alg.derivation_space(g)
    inner = alg.exp_derivation(alg.ad(g, [0.2, -0.1, 0.5]))
    outer = alg.exp_derivation(0.3 * np.diag([1.0, 0.0, 1.0]))
    assert alg.same_inner_coset(ds, inner, np.eye(3)) is alg.Coset.SAME
    assert alg.same_inner_coset(ds, outer, np.eye(3)) is alg.Coset.DIFFERENT
    assert alg.same_inner_coset(ds, outer @ inner, outer) is alg.Coset.SAME
    s = alg.derivation_space(alg.sl2())
    assert alg.same_inner_coset(s, np.diag([1.0, -1, -1]), np.eye(3)) is alg.Coset.INCONCLUSIVE


def test_structure_tensor_is_read_only():
    g = alg.so3()
    with pytest.raises(ValueError):
        g.structure[0, 0, 0] = 1.0


@pytest.mark.parametrize("i,j", list(itertools.combinations(range(3), 2)))
def test_so3_is_cross_product(i, j):
    e = np.eye(3)
    assert np.allclose(alg.bracket(alg.so3(), e[i], e[j]), np.cross(e[i], e[j]))
