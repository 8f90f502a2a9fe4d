"""Finite-dimensional real Lie algebras, derivations and automorphisms.

Everything works in the standard basis ``e_1..e_n`` of R^n. Endomorphisms of
the algebra are plain ``(n, n)`` arrays acting on coordinate columns, so
``ad(u)[:, j]`` holds the coordinates of ``[u, e_j]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

# absolute, for bracket identities on O(1) structure constants
TOL_ALG = 1e-10
# relative to max(1, ||D||_F)
TOL_INNER = 1e-8
TOL_EXP = 1e-13
# relative to the largest singular value
TOL_RANK = 1e-9
# condition numbers above this count as singular
COND_LIMIT = 1e12


class AlgebraError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Structure-constant description ``[e_i, e_j] = sum_k c[i, j, k] e_k``.

    The tensor is stored as given; use :func:`validate_algebra` to check the
    Lie axioms.
    """

    structure: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = np.array(self.structure, dtype=float)
        if c.ndim != 3 or not (c.shape[0] == c.shape[1] == c.shape[2]) or c.shape[0] == 0:
            raise AlgebraError(f"structure tensor must have shape (n, n, n), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "structure", c)

    @property
    def dim(self) -> int:
        return self.structure.shape[0]

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.structure)

    def __repr__(self):
        return f"LieAlgebra(name={self.name!r}, dim={self.dim})"


def _check_vector(g: LieAlgebra, x, what="vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (g.dim,):
        raise AlgebraError(f"{what} has trailing dimension {x.shape[-1:]}, expected ({g.dim},)")
    return x


def bracket(g: LieAlgebra, x, y) -> np.ndarray:
    """Lie bracket of coordinate vectors; broadcasts over leading axes."""
    x = _check_vector(g, x)
    y = _check_vector(g, y)
    return np.einsum("...i,...j,ijk->...k", x, y, g.structure)


def ad(g: LieAlgebra, u) -> np.ndarray:
    """Matrix of ``x -> [u, x]``; broadcasts over leading axes of ``u``."""
    u = _check_vector(g, u)
    return np.einsum("...i,ijk->...kj", u, g.structure)


@dataclass(frozen=True)
class AlgebraReport:
    antisymmetry: float
    jacobi: float

    @property
    def ok(self) -> bool:
        return self.antisymmetry <= TOL_ALG and self.jacobi <= TOL_ALG


def validate_algebra(g: LieAlgebra) -> AlgebraReport:
    c = g.structure
    anti = float(np.max(np.abs(c + c.transpose(1, 0, 2))))
    # sum_m c[i,j,m] c[m,k,l] + cyclic(i, j, k)
    t = np.einsum("ijm,mkl->ijkl", c, c)
    jac = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return AlgebraReport(anti, float(np.max(np.abs(jac))))


def derivation_residual(g: LieAlgebra, D) -> np.ndarray:
    """Max over basis pairs of ``|D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]|``.

    ``D`` may carry leading batch axes; one residual per matrix is returned.
    """
    D = np.asarray(D, dtype=float)
    c = g.structure
    lhs = np.einsum("...km,ijm->...ijk", D, c)
    t2 = np.einsum("...ai,ajk->...ijk", D, c)
    t3 = np.einsum("...aj,iak->...ijk", D, c)
    r = np.abs(lhs - t2 - t3)
    return r.max(axis=(-3, -2, -1))


def derivation_operator(g: LieAlgebra) -> np.ndarray:
    """Matrix of ``vec(D) -> (D[e_i,e_j] - [De_i,e_j] - [e_i,De_j])_{i<j}``.

    ``vec`` is row-major flattening of ``D``.
    """
    n = g.dim
    c = g.structure
    eye = np.eye(n)
    # T[i, j, k, p, q]: coefficient of D[p, q]
    T = (
        np.einsum("kp,ijq->ijkpq", eye, c)
        - np.einsum("qi,pjk->ijkpq", eye, c)
        - np.einsum("qj,ipk->ijkpq", eye, c)
    )
    iu, ju = np.triu_indices(n, k=1)
    return T[iu, ju].reshape(len(iu) * n, n * n)


def _rank_split(s: np.ndarray, size: int, rtol: float):
    """Rank and ambiguity flag for singular values ``s`` of an operator on R^size."""
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return 0, False
    tol = rtol * smax
    rank = int(np.sum(s > tol))
    ambiguous = bool(np.any((s > tol / 10) & (s < tol * 10)))
    return rank, ambiguous


@dataclass(frozen=True, eq=False)
class DerivationSpace:
    algebra: LieAlgebra
    der_basis: np.ndarray  # (dim Der, n, n), Frobenius-orthonormal
    ad_basis: np.ndarray  # (dim ad, n, n), Frobenius-orthonormal
    ad_matrix: np.ndarray  # (n*n, n), columns vec(ad(e_i))
    center: np.ndarray  # (dim center, n), orthonormal
    ambiguous: bool = False

    @property
    def dims(self) -> tuple[int, int]:
        return len(self.der_basis), len(self.ad_basis)


def derivation_space(g: LieAlgebra, rtol: float = TOL_RANK) -> DerivationSpace:
    n = g.dim
    op = derivation_operator(g)
    if op.size:
        _, s, vh = np.linalg.svd(op, full_matrices=True)
    else:
        s, vh = np.zeros(0), np.eye(n * n)
    rank, amb1 = _rank_split(s, n * n, rtol)
    der = vh[rank:].reshape(-1, n, n)

    A = ad(g, np.eye(n)).reshape(n, n * n).T
    u, s2, vh2 = np.linalg.svd(A, full_matrices=True)
    r2, amb2 = _rank_split(s2, n, rtol)
    ad_basis = u[:, :r2].T.reshape(-1, n, n)
    center = vh2[r2:]
    return DerivationSpace(
        algebra=g,
        der_basis=der,
        ad_basis=ad_basis,
        ad_matrix=A,
        center=center,
        ambiguous=amb1 or amb2,
    )


@dataclass(frozen=True)
class InnerDecomposition:
    witness_u: np.ndarray
    residual: float
    norm: float
    tol: float = TOL_INNER

    @property
    def relative_residual(self) -> float:
        return self.residual / max(1.0, self.norm)

    @property
    def is_inner(self) -> bool:
        return self.residual <= self.tol * max(1.0, self.norm)


def inner_test(ds: DerivationSpace, D, tol: float = TOL_INNER) -> InnerDecomposition:
    """Distance from ``D`` to ``ad g`` with the minimal-norm ``u`` realising it."""
    D = np.asarray(D, dtype=float)
    n = ds.algebra.dim
    if D.shape != (n, n):
        raise AlgebraError(f"endomorphism must be ({n}, {n}), got {D.shape}")
    u, *_ = np.linalg.lstsq(ds.ad_matrix, D.reshape(-1), rcond=TOL_RANK)
    res = float(np.linalg.norm(D - ad(ds.algebra, u)))
    return InnerDecomposition(u, res, float(np.linalg.norm(D)), tol)


def exp_derivation(D) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    Leading axes are a batch; the whole batch shares one scaling exponent.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[-1]
    norm = float(np.max(np.abs(D).sum(axis=-2))) if D.size else 0.0
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0 else 0
    X = D / 2.0**s
    result = np.broadcast_to(np.eye(n), D.shape).copy()
    term = result.copy()
    for k in range(1, 40):
        term = term @ X / k
        if not np.any(term):
            break
        result = result + term
        if np.max(np.abs(term)) <= 1e-17 * np.max(np.abs(result)):
            break
    for _ in range(s):
        result = result @ result
    return result


def log_near_identity(C) -> np.ndarray:
    """Principal logarithm by its power series, batched; needs ``|C - I| < 1/2``."""
    C = np.asarray(C, dtype=float)
    E = C - np.eye(C.shape[-1])
    if E.size and np.max(np.abs(E).sum(axis=-2)) >= 0.5:
        raise ValueError("matrix too far from the identity for the log series")
    result = np.zeros_like(E)
    power = np.broadcast_to(np.eye(C.shape[-1]), E.shape).copy()
    for k in range(1, 60):
        power = power @ E
        term = power / k if k % 2 else -power / k
        result = result + term
        if np.max(np.abs(term), initial=0.0) <= 1e-17 * max(1.0, np.max(np.abs(result), initial=0.0)):
            break
    return result


def log_derivative(C_plus, C_minus, C0, step: float) -> np.ndarray:
    """Right logarithmic derivative ``(dC) C^-1`` from a central stencil.

    Built from ``log(C(x +- h) C(x)^-1)``, so for curves of automorphisms the
    result is a derivation up to roundoff whatever the step.
    """
    inv = np.linalg.inv(C0)
    return (log_near_identity(C_plus @ inv) - log_near_identity(C_minus @ inv)) / (2 * step)


class AutCode(str, enum.Enum):
    OK = "ok"
    NOT_HOMOMORPHISM = "not_homomorphism"
    SINGULAR = "singular"


@dataclass(frozen=True)
class AutomorphismReport:
    residual: float
    condition: float
    code: AutCode

    @property
    def ok(self) -> bool:
        return self.code is AutCode.OK


def automorphism_residual(g: LieAlgebra, A) -> np.ndarray:
    """Max over basis pairs of ``|A[e_i,e_j] - [Ae_i, Ae_j]|``, batched over ``A``."""
    A = np.asarray(A, dtype=float)
    c = g.structure
    lhs = np.einsum("...km,ijm->...ijk", A, c)
    rhs = np.einsum("...ai,...bj,abk->...ijk", A, A, c)
    return np.linalg.norm(lhs - rhs, axis=-1).max(axis=(-2, -1))


def is_automorphism(g: LieAlgebra, A, tol: float = TOL_ALG) -> AutomorphismReport:
    A = np.asarray(A, dtype=float)
    res = float(automorphism_residual(g, A))
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        code = AutCode.SINGULAR
    elif res > tol:
        code = AutCode.NOT_HOMOMORPHISM
    else:
        code = AutCode.OK
    return AutomorphismReport(res, cond, code)


class Coset(str, enum.Enum):
    SAME = "same"
    DIFFERENT = "different"
    INCONCLUSIVE = "inconclusive"


def same_inner_coset(ds: DerivationSpace, A, B) -> Coset:
    """Decide whether ``A B^-1`` is inner, locally around the identity only.

    Outside the region where the principal logarithm is given by its power
    series the answer is ``INCONCLUSIVE``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = A @ np.linalg.inv(B)
    n = C.shape[0]
    rho = float(np.max(np.abs(np.linalg.eigvals(C - np.eye(n)))))
    if rho >= 1.0:
        return Coset.INCONCLUSIVE
    L = scipy.linalg.logm(C)
    if np.iscomplexobj(L):
        if np.max(np.abs(L.imag)) > 1e-10:
            return Coset.INCONCLUSIVE
        L = L.real
    return Coset.SAME if inner_test(ds, L).is_inner else Coset.DIFFERENT


# -- catalog -------------------------------------------------------------


def from_brackets(name: str, dim: int, brackets) -> LieAlgebra:
    """Build an algebra from ``(i, j, coefficients)`` records, 1-based indices.

    Unlisted pairs are zero and ``(j, i)`` is completed by antisymmetry. A
    pair given in both orders must be consistent.
    """
    if not isinstance(dim, int) or dim <= 0:
        raise AlgebraError(f"dim must be a positive integer, got {dim!r}")
    c = np.zeros((dim, dim, dim))
    given = {}
    for rec in brackets:
        try:
            i, j, coeffs = rec
        except (TypeError, ValueError):
            raise AlgebraError(f"bracket record must be (i, j, coefficients), got {rec!r}") from None
        if not (1 <= i <= dim and 1 <= j <= dim):
            raise AlgebraError(f"bracket indices ({i}, {j}) out of range 1..{dim}")
        v = np.asarray(coeffs, dtype=float)
        if v.shape != (dim,):
            raise AlgebraError(f"coefficients for ({i}, {j}) must have length {dim}")
        if i == j:
            if np.any(v):
                raise AlgebraError(f"[e{i}, e{i}] must vanish")
            continue
        if (i, j) in given and not np.array_equal(given[(i, j)], v):
            raise AlgebraError(f"pair ({i}, {j}) listed twice with different values")
        if (j, i) in given and not np.array_equal(given[(j, i)], -v):
            raise AlgebraError(f"pairs ({i}, {j}) and ({j}, {i}) are not antisymmetric")
        given[(i, j)] = v
        c[i - 1, j - 1] = v
        c[j - 1, i - 1] = -v
    return LieAlgebra(c, name)


def load_algebra(record: dict) -> LieAlgebra:
    """Algebra from a ``{name, dim, brackets}`` mapping (as read from a file)."""
    try:
        return from_brackets(record.get("name", ""), record["dim"], record.get("brackets", []))
    except KeyError as exc:
        raise AlgebraError(f"algebra record missing field {exc}") from None


def abelian(n: int) -> LieAlgebra:
    return from_brackets(f"abelian{n}", n, [])


def so3() -> LieAlgebra:
    return from_brackets("so3", 3, [(1, 2, [0, 0, 1]), (2, 3, [1, 0, 0]), (3, 1, [0, 1, 0])])


def sl2() -> LieAlgebra:
    # basis (h, e, f)
    return from_brackets("sl2", 3, [(1, 2, [0, 2, 0]), (1, 3, [0, 0, -2]), (2, 3, [1, 0, 0])])


def heisenberg3() -> LieAlgebra:
    return from_brackets("heisenberg3", 3, [(1, 2, [0, 0, 1])])


def affine2() -> LieAlgebra:
    return from_brackets("aff2", 2, [(1, 2, [0, 1])])


CATALOG = {
    "abelian1": lambda: abelian(1),
    "abelian2": lambda: abelian(2),
    "abelian3": lambda: abelian(3),
    "abelian4": lambda: abelian(4),
    "so3": so3,
    "sl2": sl2,
    "heisenberg3": heisenberg3,
    "aff2": affine2,
}


def builtin(name: str) -> LieAlgebra:
    try:
        return CATALOG[name]()
    except KeyError:
        raise AlgebraError(f"unknown algebra {name!r}; known: {', '.join(CATALOG)}") from None
