"""One-dimensional nodal basis, quadrature rules and factored 1D operators.

Everything lives on the reference interval [0, 1].  The nodal basis uses
Gauss-Lobatto support points; cell integrals use either Gauss-Legendre points
or (collocation) the Gauss-Lobatto points themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAUSS_LEGENDRE = "gauss_legendre"
GAUSS_LOBATTO = "gauss_lobatto"
QUADRATURE_KINDS = (GAUSS_LEGENDRE, GAUSS_LOBATTO)

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


@dataclass(frozen=True)
class QuadratureRule1D:
    kind: str
    n_q: int
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def legendre_with_derivative(n, x):
    """Return P_n(x) and P_n'(x) via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    dp0, dp1 = np.zeros_like(x), np.ones_like(x)
    for m in range(2, n + 1):
        p2 = ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
        dp2 = dp0 + (2 * m - 1) * p1
        p0, p1 = p1, p2
        dp0, dp1 = dp1, dp2
    return p1, dp1


def _newton(update, x0):
    x = x0.copy()
    for _ in range(NEWTON_MAXITER):
        dx = update(x)
        x -= dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            return x
    # round-off can keep the last step at a few ulps; accept if tiny
    if np.max(np.abs(update(x))) <= 1e2 * NEWTON_TOL:
        return x
    raise RuntimeError("Newton iteration for quadrature nodes did not converge")


def _to_unit_interval(kind, n_q, x, w):
    x = 0.5 * (x - x[::-1])  # enforce exact symmetry about 0
    order = np.argsort(x)
    x, w = x[order], w[order]
    w = 0.5 * (w + w[::-1])
    return QuadratureRule1D(kind, n_q, 0.5 * (1.0 + x), 0.5 * w)


def gauss_legendre_rule(n_q):
    """Gauss-Legendre rule with n_q points, exact up to degree 2*n_q - 1."""
    if n_q < 1:
        raise ValueError("Gauss-Legendre rule needs n_q >= 1")
    i = np.arange(n_q)
    x0 = -np.cos(np.pi * (i + 0.75) / (n_q + 0.5))

    def step(x):
        p, dp = legendre_with_derivative(n_q, x)
        return p / dp

    x = _newton(step, x0)
    _, dp = legendre_with_derivative(n_q, x)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    return _to_unit_interval(GAUSS_LEGENDRE, n_q, x, w)


def gauss_lobatto_rule(n_q):
    """Gauss-Lobatto rule with n_q points (endpoints included), exact up to 2*n_q - 3."""
    if n_q < 2:
        raise ValueError("Gauss-Lobatto rule needs n_q >= 2")
    m = n_q - 1
    x = -np.cos(np.pi * np.arange(n_q) / m)
    if n_q > 2:
        interior = x[1:-1]

        # roots of P_m' with P_m'' from the Legendre ODE
        def step(y):
            p, dp = legendre_with_derivative(m, y)
            d2p = (2.0 * y * dp - m * (m + 1) * p) / (1.0 - y**2)
            return dp / d2p

        x[1:-1] = _newton(step, interior)
    p, _ = legendre_with_derivative(m, x)
    w = 2.0 / (m * (m + 1) * p**2)
    return _to_unit_interval(GAUSS_LOBATTO, n_q, x, w)


def quadrature_rule(kind, n_q):
    if kind == GAUSS_LEGENDRE:
        return gauss_legendre_rule(n_q)
    if kind == GAUSS_LOBATTO:
        return gauss_lobatto_rule(n_q)
    raise ValueError(f"unknown quadrature kind {kind!r}")


def lagrange_values(nodes, x):
    """Matrix L[i, j] = l_j(x_i) for the Lagrange polynomials through `nodes`."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    out = np.ones((len(x), n))
    for j in range(n):
        for m in range(n):
            if m != j:
                out[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return out


def lagrange_derivatives(nodes, x):
    """Matrix L[i, j] = l_j'(x_i)."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    out = np.zeros((len(x), n))
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            term = np.full(len(x), 1.0 / (nodes[j] - nodes[i]))
            for m in range(n):
                if m != j and m != i:
                    term *= (x - nodes[m]) / (nodes[j] - nodes[m])
            out[:, j] += term
    return out


def even_odd_model_flops(k):
    """Model FLOPs per DoF of one even-odd basis-change sweep of degree k."""
    if k < 2:
        raise ValueError("the even-odd model is defined for k >= 2")
    return 3.0 + 2.0 * ((k - 1) * (k + 1) // 2) / (k - 1)


@dataclass(frozen=True)
class EvenOdd:
    """Even-odd factorization of a (skew-)centrosymmetric matrix.

    For a matrix with M[::-1, ::-1] == parity * M the product y = M x is
    evaluated from the half-size matrices acting on (x_j +- x_{n-1-j}) / 2.
    """

    parity: int
    n_out: int
    n_in: int
    even: np.ndarray  # (h_out, h_in) E_ij = M_ij + M_i,n-1-j
    odd: np.ndarray  # (h_out, h_in) O_ij = M_ij - M_i,n-1-j
    mid_col: np.ndarray | None  # (h_out,) column of the middle input
    mid_row_even: np.ndarray | None  # middle output row acting on even part
    mid_row_odd: np.ndarray | None
    mid_entry: float

    @classmethod
    def from_matrix(cls, matrix, tol=1e-12):
        a = np.asarray(matrix, dtype=float)
        n_out, n_in = a.shape
        scale = max(np.max(np.abs(a)), 1.0)
        parity = None
        for s in (1, -1):
            if np.max(np.abs(a[::-1, ::-1] - s * a)) <= tol * scale:
                parity = s
                break
        if parity is None:
            return None
        ho, hi = n_out // 2, n_in // 2
        rev = np.arange(n_in - 1, n_in - 1 - hi, -1)
        even = a[:ho, :hi] + a[:ho, rev]
        odd = a[:ho, :hi] - a[:ho, rev]
        mid_col = a[:ho, hi].copy() if n_in % 2 else None
        mid_row_even = mid_row_odd = None
        mid_entry = 0.0
        if n_out % 2:
            r = a[ho]
            if parity == 1:
                mid_row_even = r[:hi] + r[rev]
            else:
                mid_row_odd = r[:hi] - r[rev]
            if n_in % 2 and parity == 1:
                mid_entry = float(r[hi])
        return cls(parity, n_out, n_in, even, odd, mid_col, mid_row_even, mid_row_odd, mid_entry)

    def line_flops(self):
        """FLOPs for one 1D line (FMA counted as 2, the /2 scalings counted)."""
        ho, hi = self.n_out // 2, self.n_in // 2
        f = 4 * hi  # sums, differences and their halving
        f += 4 * ho * hi  # even and odd half products
        if self.mid_col is not None:
            f += 2 * ho
        f += 2 * ho  # recombination a + b, a - b
        if self.n_out % 2:
            f += 2 * hi
            if self.mid_row_even is not None and self.n_in % 2:
                f += 2
        return f

    def apply(self, x3):
        """Apply along axis 1 of an array of shape (P, n_in, Q)."""
        hi, ho = self.n_in // 2, self.n_out // 2
        lo_part = x3[:, :hi]
        hi_part = x3[:, self.n_in - 1 : self.n_in - 1 - hi : -1] if hi else x3[:, :0]
        e = 0.5 * (lo_part + hi_part)
        o = 0.5 * (lo_part - hi_part)
        a = np.matmul(self.even, e)
        if self.mid_col is not None:
            a += self.mid_col[:, None] * x3[:, hi : hi + 1]
        b = np.matmul(self.odd, o)
        y = np.empty((x3.shape[0], self.n_out, x3.shape[2]))
        y[:, :ho] = a + b
        if self.parity == 1:
            y[:, self.n_out - 1 : self.n_out - 1 - ho : -1] = a - b
        else:
            y[:, self.n_out - 1 : self.n_out - 1 - ho : -1] = b - a
        if self.n_out % 2:
            if self.mid_row_even is not None:
                y[:, ho] = np.einsum("j,pjq->pq", self.mid_row_even, e)
                if self.n_in % 2:
                    y[:, ho] += self.mid_entry * x3[:, hi]
            else:
                y[:, ho] = np.einsum("j,pjq->pq", self.mid_row_odd, o)
        return y


@dataclass(frozen=True)
class TensorOp1D:
    """A 1D matrix applied along one tensor axis, with an optional fast path."""

    matrix: np.ndarray
    even_odd: EvenOdd | None = None
    identity: bool = False

    @classmethod
    def build(cls, matrix, tol=1e-14):
        m = np.asarray(matrix, dtype=float)
        ident = m.shape[0] == m.shape[1] and np.max(np.abs(m - np.eye(m.shape[0]))) <= tol
        return cls(m, EvenOdd.from_matrix(m), bool(ident))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def T(self):
        return TensorOp1D.build(self.matrix.T)


def even_odd_apply(factored, x):
    """Apply an even-odd factored matrix to a vector; returns (y, flop_count).

    Falls back to the dense product (flop_count from the dense count) when the
    matrix has no usable symmetry; in that case the third entry is True.
    """
    if isinstance(factored, EvenOdd):
        eo, dense = factored, None
    else:
        op = factored if isinstance(factored, TensorOp1D) else TensorOp1D.build(factored)
        eo, dense = op.even_odd, op.matrix
    x = np.asarray(x, dtype=float)
    if eo is None:
        return dense @ x, 2 * dense.shape[0] * dense.shape[1], True
    y = eo.apply(x.reshape(1, -1, 1)).reshape(-1)
    return y, eo.line_flops(), False


@dataclass(frozen=True)
class Basis1D:
    k: int
    quadrature: QuadratureRule1D
    support_points: np.ndarray
    interp_to_quad: np.ndarray
    grad_at_quad: np.ndarray
    inverse_vandermonde: np.ndarray
    colloc_derivative: np.ndarray
    face_weights: np.ndarray  # (2, n_q): Lagrange basis on quad points at 0 and 1
    ops: dict = field(repr=False, default_factory=dict)

    @property
    def n(self):
        return self.k + 1

    @property
    def n_q(self):
        return self.quadrature.n_q

    @property
    def collocation(self):
        return self.quadrature.kind == GAUSS_LOBATTO


def build_basis(k, quadrature=GAUSS_LEGENDRE):
    """Nodal basis of degree k on Gauss-Lobatto points with an n_q = k+1 rule."""
    if k < 1:
        raise ValueError("polynomial degree must be >= 1")
    rule = quadrature if isinstance(quadrature, QuadratureRule1D) else quadrature_rule(quadrature, k + 1)
    if rule.n_q != k + 1:
        raise ValueError("only n_q = k + 1 is supported")
    support = gauss_lobatto_rule(k + 1).points
    if rule.kind == GAUSS_LOBATTO:
        interp = np.eye(k + 1)
    else:
        interp = lagrange_values(support, rule.points)
    grad = lagrange_derivatives(support, rule.points)
    inv_v = np.linalg.inv(interp)
    dco = lagrange_derivatives(rule.points, rule.points)
    faces = lagrange_values(rule.points, [0.0, 1.0])
    ops = {
        "interp": TensorOp1D.build(interp),
        "interp_T": TensorOp1D.build(interp.T),
        "inv_vandermonde": TensorOp1D.build(inv_v),
        "inv_vandermonde_T": TensorOp1D.build(inv_v.T),
        "colloc_derivative": TensorOp1D.build(dco),
        "colloc_derivative_T": TensorOp1D.build(dco.T),
    }
    return Basis1D(k, rule, support, interp, grad, inv_v, dco, faces, ops)
