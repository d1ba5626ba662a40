"""Right-hand sides of the two surface evolution equations in slope form.

Both models evolve a zero-mean field v on the torus:

    exponential model:   dv/dt = bilaplacian(exp(-v))
    adl model:           dv/dt = bilaplacian((1 + v)^(-3))

Each splits into a stiff linear part -c * bilaplacian(v) (c = 1 for the
exponential model, c = 3 for the adl model) plus a superlinear remainder
that vanishes to second order at v = 0.  The remainder is what the
exponential integrators treat explicitly, so it is computed directly from
the series with the constant and linear terms removed analytically; this
keeps the truncated-at-order-1 remainder identically zero instead of
rounding-noise sized.

Nonlinearity evaluation is pseudo-spectral: sample v on the (padded)
collocation grid, apply the scalar function pointwise, project back onto
the retained modes, then apply the biharmonic multiplier.  The biharmonic
factor annihilates the mean mode, so the result has exactly zero mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    GridSpec,
    SpectralField,
    _coeffs_from_phys,
    _phys_from_coeffs,
    _plan,
    from_physical,
    inverse_laplacian_zero_mean,
    laplacian,
    require_zero_mean,
    to_physical,
)

EXPONENTIAL = "exp"
ADL = "adl"
MODEL_KINDS = (EXPONENTIAL, ADL)

FULL = "full"
TRUNCATED = "truncated"
NONLINEARITY_MODES = (FULL, TRUNCATED)

DEFAULT_TRUNCATION_ORDER = 20

# Collocation values of 1 + v at or below this count as a blow-up of the
# adl nonlinearity rather than a resolvable state.
ADL_SINGULAR_FLOOR = 1e-8


class SingularityError(ArithmeticError):
    """The adl nonlinearity was evaluated at a state with 1 + v near zero.

    Attributes:
        time: simulation time of the failing evaluation, when known.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


def linear_coefficient(kind: str) -> float:
    """Coefficient c of the stiff linear part -c * bilaplacian(v)."""
    if kind == EXPONENTIAL:
        return 1.0
    if kind == ADL:
        return 3.0
    raise ValueError(f"unknown model kind {kind!r}")


def binomial_coeff(n: int, k: int) -> int:
    """Exact integer binomial coefficient C(n, k)."""
    if n < 0 or k < 0:
        raise ValueError(f"binomial_coeff requires n, k >= 0, got n={n}, k={k}")
    if k > n:
        return 0
    return math.comb(n, k)


@dataclass(frozen=True)
class ModelConfig:
    """Model selection: which equation, and full or truncated nonlinearity.

    Attributes:
        kind: "exp" or "adl".
        grid: discretization the right-hand side operates on.
        mode: "full" for the closed-form nonlinearity, "truncated" for the
            Galerkin-regularized partial sum of its Taylor series.
        truncation_order: highest series order N kept in truncated mode.
    """

    kind: str
    grid: GridSpec
    mode: str = FULL
    truncation_order: int = DEFAULT_TRUNCATION_ORDER

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.mode not in NONLINEARITY_MODES:
            raise ValueError(f"mode must be one of {NONLINEARITY_MODES}, got {self.mode!r}")
        if self.mode == TRUNCATED and self.truncation_order < 0:
            raise ValueError("truncation_order must be >= 0")

    @property
    def linear_coefficient(self) -> float:
        return linear_coefficient(self.kind)


def exp_series_partial_sum(values: np.ndarray, order: int) -> np.ndarray:
    """Partial sum sum_{j=0}^{N} (-v)^j / j! of exp(-v), evaluated pointwise."""
    y = -np.asarray(values, dtype=float)
    acc = np.full_like(y, 1.0 / math.factorial(order))
    for j in range(order - 1, -1, -1):
        acc = acc * y + 1.0 / math.factorial(j)
    return acc


def adl_series_partial_sum(values: np.ndarray, order: int) -> np.ndarray:
    """Partial sum sum_{j=0}^{N} (-1)^j C(j+2, j) v^j of (1 + v)^(-3)."""
    v = np.asarray(values, dtype=float)
    acc = np.full_like(v, float((-1) ** order * binomial_coeff(order + 2, order)))
    for j in range(order - 1, -1, -1):
        acc = acc * v + float((-1) ** j * binomial_coeff(j + 2, j))
    return acc


def _superlinear_pointwise(cfg: ModelConfig, v_phys: np.ndarray) -> np.ndarray:
    """Nonlinearity minus its constant and linear terms, evaluated pointwise.

    Returns g(v) - g(0) - g'(0) v where g is the (possibly truncated)
    nonlinearity, with the cancelled low-order terms removed from the series
    analytically rather than numerically.
    """
    kind, mode, order = cfg.kind, cfg.mode, cfg.truncation_order
    if kind == EXPONENTIAL:
        if mode == FULL:
            # exp(-v) - 1 + v via expm1 to avoid cancellation at small v
            return np.expm1(-v_phys) + v_phys
        if order == 0:
            return v_phys.astype(float)  # partial sum is 1; remainder restores +v
        if order == 1:
            return np.zeros_like(v_phys, dtype=float)
        y = -v_phys
        acc = np.full_like(y, 1.0 / math.factorial(order))
        for j in range(order - 1, 1, -1):
            acc = acc * y + 1.0 / math.factorial(j)
        return acc * y * y
    # adl
    if mode == FULL:
        # (1+v)^(-3) - 1 + 3v = expm1(-3 log1p(v)) + 3v, stable for small v
        return np.expm1(-3.0 * np.log1p(v_phys)) + 3.0 * v_phys
    if order == 0:
        return 3.0 * v_phys
    if order == 1:
        return np.zeros_like(v_phys, dtype=float)
    acc = np.full_like(v_phys, float((-1) ** order * binomial_coeff(order + 2, order)))
    for j in range(order - 1, 1, -1):
        acc = acc * v_phys + float((-1) ** j * binomial_coeff(j + 2, j))
    return acc * v_phys * v_phys


def _check_adl_positivity(v_phys: np.ndarray, time: float | None = None) -> None:
    floor = float(np.min(1.0 + v_phys))
    if floor <= ADL_SINGULAR_FLOOR:
        raise SingularityError(
            f"adl nonlinearity singular: min(1 + v) = {floor:.3e} on the collocation grid",
            time=time,
        )


def remainder_fn(cfg: ModelConfig):
    """Raw-array evaluator of the superlinear remainder, for the stepper.

    Returns a callable mapping a coefficient array to the coefficient array
    of bilaplacian(superlinear part), with an optional `time` keyword used
    to tag singularity errors.
    """
    grid = cfg.grid
    k4 = _plan(grid)["k4"]
    is_adl = cfg.kind == ADL
    needs_guard = is_adl and (cfg.mode == FULL)

    def evaluate(coeffs: np.ndarray, time: float | None = None) -> np.ndarray:
        v_phys = _phys_from_coeffs(grid, coeffs)
        if needs_guard:
            _check_adl_positivity(v_phys, time)
        w = _superlinear_pointwise(cfg, v_phys)
        return _coeffs_from_phys(grid, w) * k4

    return evaluate


def nonlinear_remainder(cfg: ModelConfig, v: SpectralField) -> SpectralField:
    """Superlinear part of the right-hand side, rhs + c * bilaplacian(v).

    Vanishes to second order as v -> 0, and is identically zero for the
    exponential model truncated at order 1.
    """
    _require_model_grid(cfg, v)
    require_zero_mean(v)
    return SpectralField(v.grid, remainder_fn(cfg)(v.coeffs))


def rhs(cfg: ModelConfig, v: SpectralField) -> SpectralField:
    """Full right-hand side: -c * bilaplacian(v) plus the superlinear remainder."""
    _require_model_grid(cfg, v)
    require_zero_mean(v)
    k4 = _plan(v.grid)["k4"]
    linear = v.coeffs * (-cfg.linear_coefficient * k4)
    return SpectralField(v.grid, linear + remainder_fn(cfg)(v.coeffs))


def _require_model_grid(cfg: ModelConfig, v: SpectralField) -> None:
    if v.grid != cfg.grid:
        raise ValueError("field grid does not match the model configuration grid")


def _reconstruction_grid(grid: GridSpec) -> GridSpec:
    """Finest grid representable on the same collocation points.

    Used for pointwise changes of variables whose result is not band-limited
    to the model's M modes; keeping every resolvable mode makes the sampled
    identity hold to rounding accuracy.
    """
    p = grid.phys_points_per_axis
    return GridSpec(grid.dim, p // 2 - 1, p, padding_factor=1.0)


def _truncate_to(f: SpectralField, grid: GridSpec) -> SpectralField:
    """Restrict a field to a coarser mode set on the same collocation grid."""
    if grid.phys_points_per_axis != f.grid.phys_points_per_axis or grid.dim != f.grid.dim:
        raise ValueError("target grid must share the collocation resolution")
    shift = f.grid.modes_per_axis - grid.modes_per_axis
    if shift < 0:
        raise ValueError("target grid retains more modes than the source field")
    sl = slice(shift, shift + 2 * grid.modes_per_axis + 1)
    c = f.coeffs[sl] if f.grid.dim == 1 else f.coeffs[sl, sl]
    return SpectralField(grid, c.copy())


def u_from_v(kind: str, v: SpectralField) -> SpectralField:
    """Recover the surface representation u from the slope field v.

    Exponential model: u solves laplacian(u) = v with zero mean, on the same
    grid.  Adl model: u = 1/(1 + v) sampled pointwise and returned on the
    reconstruction grid of all modes resolvable on the collocation points.
    """
    if kind == EXPONENTIAL:
        return inverse_laplacian_zero_mean(v)
    if kind == ADL:
        v_phys = to_physical(v)
        _check_adl_positivity(v_phys)
        return from_physical(1.0 / (1.0 + v_phys), _reconstruction_grid(v.grid))
    raise ValueError(f"unknown model kind {kind!r}")


def v_from_u(kind: str, u: SpectralField, grid: GridSpec | None = None) -> SpectralField:
    """Inverse of u_from_v up to re-truncation onto `grid` (default: u's grid).

    For the adl model the reciprocal surface 1/u is normalized to mean one
    before conversion, and the result is re-centered to exactly zero mean.
    """
    target = grid if grid is not None else u.grid
    if kind == EXPONENTIAL:
        out = laplacian(u)
        return out if target == u.grid else _truncate_to(out, target)
    if kind != ADL:
        raise ValueError(f"unknown model kind {kind!r}")
    u_phys = to_physical(u)
    floor = float(np.min(u_phys))
    if floor <= ADL_SINGULAR_FLOOR:
        raise SingularityError(
            f"surface not positive: min(u) = {floor:.3e} on the collocation grid"
        )
    w = 1.0 / u_phys
    w = w / float(np.mean(w))
    if target.phys_shape != u_phys.shape:
        raise ValueError("target grid must share the collocation resolution")
    out = from_physical(w - 1.0, target)
    c = out.coeffs.copy()
    c[target.index_of(0 if target.dim == 1 else (0, 0))] = 0.0
    return SpectralField(target, c)
