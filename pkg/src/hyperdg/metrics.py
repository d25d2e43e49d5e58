"""Software performance counters and derived metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .basis import even_odd_model_flops

BYTES_PER_DOUBLE = 8


@dataclass
class OpCounters:
    flops: int = 0
    modeled_doubles_moved: int = 0
    wall_seconds: float = 0.0
    dofs_processed: int = 0
    flux_evals: int = 0
    contraction_sweeps: int = 0
    ghost_updates: int = 0
    pointwise_passes: int = 0
    field_lookups: int = 0
    applications: int = 0
    dense_fallbacks: int = 0

    def add(self, other):
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self

    def __add__(self, other):
        return OpCounters(**asdict(self)).add(other)

    def copy(self):
        return OpCounters(**asdict(self))

    def as_dict(self):
        return asdict(self)

    def delta(self, earlier):
        return OpCounters(**{f.name: getattr(self, f.name) - getattr(earlier, f.name) for f in fields(self)})


def merge_counters(items):
    total = OpCounters()
    for c in items:
        total.add(c)
    return total


def throughput(counters, renormalize=None):
    """Processed DoFs per second.

    With ``renormalize=(k, d)`` the result is scaled by k^d / (k+1)^d, which
    makes DG numbers comparable to continuous elements of the same degree.
    """
    if counters.dofs_processed == 0:
        return 0.0
    if counters.wall_seconds <= 0:
        raise ValueError("throughput needs a positive wall time")
    value = counters.dofs_processed / counters.wall_seconds
    if renormalize is not None:
        k, d = renormalize
        value *= (k / (k + 1)) ** d
    return value


def arithmetic_intensity(counters, level="modeled"):
    if level != "modeled":
        raise ValueError("only the modeled accounting level is available")
    if counters.modeled_doubles_moved <= 0:
        raise ValueError("arithmetic intensity needs a positive data volume")
    return counters.flops / (BYTES_PER_DOUBLE * counters.modeled_doubles_moved)


def flops_per_dof_model(k, d, operation):
    """Analytic FLOPs per DoF.

    basis_change_sweep: one even-odd 1D sweep.
    cell_integrals: d forward sweeps, d collocation-derivative sweeps and d
    inverse basis-change sweeps, plus about two pointwise FLOPs per dimension.
    """
    if operation == "basis_change_sweep":
        return even_odd_model_flops(k)
    if operation == "cell_integrals":
        return d * (3.0 * even_odd_model_flops(k) + 2.0)
    raise ValueError(f"unknown operation {operation!r}")


def working_set(k, d, v_len):
    """Coefficients live during one batch of sum-factorization sweeps."""
    return v_len * (k + 1) ** d


def mapping_memory_per_dof(k, d_x, d_v, mode):
    """Doubles per DoF needed for cell Jacobians."""
    n = k + 1
    if mode == "tensor_per_space":
        return (n**d_x * d_x**2 + n**d_v * d_v**2) / n ** (d_x + d_v)
    if mode == "full_highdim":
        return float((d_x + d_v) ** 2)
    if mode == "cartesian_single_set":
        return 0.0
    raise ValueError(f"unknown mapping mode {mode!r}")
