"""Quick self-checks against independent oracles, used by `hyperdg verify`."""

from __future__ import annotations

import math

import numpy as np

from .basis import QUADRATURE_KINDS, build_basis, even_odd_apply, quadrature_rule
from .mesh import build_topology
from .operators import AdvectionOperator, ConstantField, assemble_dense_operator
from .partition import make_layout
from .timeint import CARPENTER_KENNEDY_45
from .vector import BUFFERED, Partitioner, allocate

# (d_x, d_v, k, subdivisions_x, subdivisions_v, deformation, flux)
OPERATOR_CASES = (
    (1, 1, 1, 3, 2, None, "upwind"),
    (1, 1, 2, 3, 2, 0.02, "central"),
    (2, 1, 2, 2, 2, 0.02, "upwind"),
    (2, 2, 1, 2, 2, None, "upwind"),
)


def check_quadrature(max_points=10, tol=1e-13):
    """Exact on monomials up to the rule's degree."""
    worst = 0.0
    for kind in QUADRATURE_KINDS:
        exact_degree = {"gauss_legendre": lambda n: 2 * n - 1, "gauss_lobatto": lambda n: 2 * n - 3}[kind]
        for n_q in range(2, max_points + 1):
            rule = quadrature_rule(kind, n_q)
            for p in range(exact_degree(n_q) + 1):
                worst = max(worst, abs(rule.weights @ rule.points**p - 1.0 / (p + 1)))
    return worst < tol, f"max monomial error {worst:.2e}"


def check_even_odd(tol=1e-13):
    rng = np.random.default_rng(7)
    worst = 0.0
    for k in range(1, 8):
        basis = build_basis(k)
        for name in ("interp", "inv_vandermonde", "colloc_derivative_T"):
            op = basis.ops[name]
            x = rng.uniform(-1, 1, op.shape[1])
            y, _, _ = even_odd_apply(op, x)
            worst = max(worst, np.max(np.abs(y - op.matrix @ x)))
    return worst < tol, f"max even-odd deviation {worst:.2e}"


def check_lsrk():
    """Stability polynomial agrees with exp(z) through z^4."""
    coeffs = CARPENTER_KENNEDY_45.stability_polynomial()
    taylor = np.array([1.0 / math.factorial(j) for j in range(5)])
    err = np.max(np.abs(coeffs[:5] - taylor))
    return err < 1e-12, f"Taylor coefficient error {err:.2e}"


def _operator_case(dx, dv, k, sx, sv, deform, flux):
    topo = build_topology(dx, dv, (sx,) * dx, (sv,) * dv, deformation_x=deform, deformation_v=deform)
    basis = build_basis(k)
    p = Partitioner(topo, make_layout(topo), 0, k)
    op = AdvectionOperator(p, basis, flux=flux)
    field = ConstantField([0.7, -0.3, 0.4, 0.9][: dx + dv])
    src = allocate(p, BUFFERED)
    src.assign(np.random.default_rng(0).uniform(-1.0, 1.0, src.owned.shape))
    src.update_ghost_values()
    ecl = allocate(p, BUFFERED, ghosted=False)
    fcl = allocate(p, BUFFERED, ghosted=False)
    op.apply_ecl(src, ecl, 0.0, field)
    op.apply_fcl(src, fcl, 0.0, field)
    dense = assemble_dense_operator(topo, basis, 0.0, field, flux)
    ref = (dense @ src.owned.ravel()).reshape(src.owned.shape)
    return np.max(np.abs(ecl.owned - ref)), np.max(np.abs(ecl.owned - fcl.owned)), np.max(np.abs(ref))


def check_operators(tol=1e-12):
    worst_dense = worst_fcl = 0.0
    for case in OPERATOR_CASES:
        e_dense, e_fcl, scale = _operator_case(*case)
        worst_dense = max(worst_dense, e_dense)
        worst_fcl = max(worst_fcl, e_fcl / max(scale, 1.0))
    ok = worst_dense < tol and worst_fcl < 1e-13
    return ok, f"ECL vs dense {worst_dense:.2e}, ECL vs FCL (relative) {worst_fcl:.2e}"


SUITES = (
    ("quadrature", check_quadrature),
    ("even_odd", check_even_odd),
    ("lsrk", check_lsrk),
    ("operators", check_operators),
)


def run_all():
    """[(name, ok, detail)] for every suite; exceptions count as failures."""
    results = []
    for name, fn in SUITES:
        try:
            ok, detail = fn()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
