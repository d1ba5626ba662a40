"""Fourier-side representation of real periodic fields on the 1- and 2-torus.

Fields live on [-pi, pi)^d, d in {1, 2}, sampled at uniform collocation
nodes x_j = -pi + 2*pi*j/P, and are stored as truncated Fourier coefficient
arrays indexed by integer wavenumbers k with |k_i| <= M.  Coefficients use
the mean-normalized convention

    c(k) = (2 pi)^{-d} * integral f(x) exp(-i k.x) dx,

so that f(x) = sum_k c(k) exp(i k.x) and c(0) is the mean of the field.
Under this convention the squared L2 norm is (2 pi)^d * sum_k |c(k)|^2.

The collocation nodes do not start at the origin, so the discrete transform
carries an explicit phase (-1)^(k_1+...+k_d) relative to numpy's FFT bins;
both transform directions below account for it.

Values are immutable: every operation returns a new SpectralField and no
function mutates the coefficient array of its argument.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# i**n for integer n, used to build exact derivative inverse_laplacian multipliers.
_I_POWER = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the periodic box [-pi, pi)^d.

    Attributes:
        dim: spatial dimension, 1 or 2.
        modes_per_axis: highest retained wavenumber M per axis; coefficients
            cover |k_i| <= M, an array of 2M+1 entries per axis.
        phys_points_per_axis: collocation points P per axis.  P must be even
            and large enough to dealias, P >= padding_factor * (2M+1).
        padding_factor: oversampling ratio of the collocation grid relative
            to the minimal 2M+1 points, >= 1.
    """

    dim: int
    modes_per_axis: int
    phys_points_per_axis: int
    padding_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.modes_per_axis < 1:
            raise ValueError(f"modes_per_axis must be >= 1, got {self.modes_per_axis}")
        if self.padding_factor < 1.0:
            raise ValueError(f"padding_factor must be >= 1, got {self.padding_factor}")
        p = self.phys_points_per_axis
        m = self.modes_per_axis
        if p % 2 != 0:
            raise ValueError(f"phys_points_per_axis must be even, got {p}")
        if p < 2 * m + 1:
            raise ValueError(
                f"phys_points_per_axis={p} cannot resolve modes_per_axis={m}; "
                f"need at least {2 * m + 1}"
            )
        if p + 1e-9 < self.padding_factor * (2 * m + 1):
            raise ValueError(
                f"phys_points_per_axis={p} below padding requirement "
                f"{self.padding_factor} * {2 * m + 1}"
            )

    @classmethod
    def create(
        cls,
        dim: int,
        modes_per_axis: int,
        padding_factor: float = 2.0,
        phys_points_per_axis: int | None = None,
    ) -> "GridSpec":
        """Build a grid, choosing the smallest admissible even P when not given."""
        if phys_points_per_axis is None:
            target = padding_factor * (2 * modes_per_axis + 1)
            p = int(math.ceil(target - 1e-9))
            if p % 2 != 0:
                p += 1
            phys_points_per_axis = p
        return cls(dim, modes_per_axis, phys_points_per_axis, padding_factor)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers -M..M in storage order."""
        m = self.modes_per_axis
        return np.arange(-m, m + 1)

    @property
    def nodes(self) -> np.ndarray:
        """Per-axis collocation nodes -pi + 2*pi*j/P, j = 0..P-1."""
        p = self.phys_points_per_axis
        return -math.pi + TWO_PI * np.arange(p) / p

    @property
    def coeff_shape(self) -> tuple[int, ...]:
        return (2 * self.modes_per_axis + 1,) * self.dim

    @property
    def phys_shape(self) -> tuple[int, ...]:
        return (self.phys_points_per_axis,) * self.dim

    @property
    def cell_volume(self) -> float:
        """Quadrature weight of one collocation cell, (2 pi / P)^d."""
        return (TWO_PI / self.phys_points_per_axis) ** self.dim

    def index_of(self, k) -> tuple[int, ...]:
        """Storage index of wavenumber k (an int in 1D, a pair in 2D)."""
        m = self.modes_per_axis
        ks = (k,) if self.dim == 1 else tuple(k)
        if len(ks) != self.dim:
            raise ValueError(f"wavenumber {k!r} does not match dim={self.dim}")
        for ki in ks:
            if abs(ki) > m:
                raise ValueError(f"wavenumber {k!r} outside retained band |k_i| <= {m}")
        return tuple(int(ki) + m for ki in ks)


@functools.lru_cache(maxsize=None)
def _plan(grid: GridSpec):
    """Cached index and multiplier tables for transforms on a given grid."""
    m = grid.modes_per_axis
    p = grid.phys_points_per_axis
    k = np.arange(-m, m + 1)
    bins = k % p
    # (-1)^k per axis; the product over axes gives the node-offset phase.
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    if grid.dim == 1:
        embed = (bins,)
        phase = sign
        ksq = (k.astype(float)) ** 2
    else:
        embed = np.ix_(bins, bins)
        phase = np.outer(sign, sign)
        kf = k.astype(float)
        ksq = kf[:, None] ** 2 + kf[None, :] ** 2
    kmag = np.sqrt(ksq)
    return {"embed": embed, "phase": phase, "ksq": ksq, "k4": ksq**2, "kmag": kmag}


@dataclass(frozen=True)
class SpectralField:
    """A real field represented by its truncated Fourier coefficients.

    The coefficient array is indexed so that entry i corresponds to
    wavenumber k = i - M along each axis.  Real fields satisfy the Hermitian
    symmetry c(-k) = conj(c(k)); the constructors in this module enforce it
    exactly and every operation preserves it.
    """

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.coeff_shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid {self.grid.coeff_shape}"
            )
        object.__setattr__(self, "coeffs", c)

    def coeff(self, k) -> complex:
        """Coefficient at wavenumber k."""
        return complex(self.coeffs[self.grid.index_of(k)])

    @property
    def mean_value(self) -> float:
        return float(self.coeffs[self.grid.index_of(0 if self.grid.dim == 1 else (0, 0))].real)

    @property
    def has_zero_mean(self) -> bool:
        """True when the mean-mode coefficient is exactly zero."""
        return self.coeffs[self.grid.index_of(0 if self.grid.dim == 1 else (0, 0))] == 0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        flipped = np.conj(c[::-1] if self.grid.dim == 1 else c[::-1, ::-1])
        scale = 1.0 + float(np.max(np.abs(c))) if c.size else 1.0
        return bool(np.max(np.abs(c - flipped)) <= tol * scale)


def _hermitian_symmetrize(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Average coefficients with their conjugate mirror; exact symmetry after."""
    flipped = np.conj(coeffs[::-1] if dim == 1 else coeffs[::-1, ::-1])
    return 0.5 * (coeffs + flipped)


def _phys_from_coeffs(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Raw-array inverse transform; returns real samples on the P^d grid."""
    plan = _plan(grid)
    spec = np.zeros(grid.phys_shape, dtype=np.complex128)
    scale = float(grid.phys_points_per_axis) ** grid.dim
    spec[plan["embed"]] = coeffs * (plan["phase"] * scale)
    return np.fft.ifftn(spec).real


def _coeffs_from_phys(grid: GridSpec, samples: np.ndarray) -> np.ndarray:
    """Raw-array forward transform with exact Hermitian symmetrization."""
    plan = _plan(grid)
    spec = np.fft.fftn(samples)
    coeffs = spec[plan["embed"]] * (plan["phase"] / float(samples.size))
    return _hermitian_symmetrize(coeffs, grid.dim)


def to_physical(f: SpectralField) -> np.ndarray:
    """Sample the field at the collocation nodes of its grid.

    Returns a real array of shape (P,) in 1D or (P, P) in 2D.  For the
    band-limited fields this module constructs, the imaginary residue
    discarded here is at rounding level; `imag_residue` exposes it.
    """
    return _phys_from_coeffs(f.grid, f.coeffs)


def imag_residue(f: SpectralField) -> float:
    """Largest imaginary part left by the inverse transform, before discarding."""
    plan = _plan(f.grid)
    spec = np.zeros(f.grid.phys_shape, dtype=np.complex128)
    scale = float(f.grid.phys_points_per_axis) ** f.grid.dim
    spec[plan["embed"]] = f.coeffs * (plan["phase"] * scale)
    return float(np.max(np.abs(np.fft.ifftn(spec).imag)))


def from_physical(samples: np.ndarray, grid: GridSpec) -> SpectralField:
    """Project real samples on the collocation grid onto the retained modes.

    Args:
        samples: real array of shape (P,) or (P, P) matching the grid.
        grid: target discretization.

    Raises:
        ValueError: if the sample array is complex or its shape does not
            match the grid.
    """
    s = np.asarray(samples)
    if np.iscomplexobj(s):
        raise ValueError("from_physical expects real samples")
    if s.shape != grid.phys_shape:
        raise ValueError(
            f"sample shape {s.shape} does not match grid {grid.phys_shape}"
        )
    return SpectralField(grid, _coeffs_from_phys(grid, s.astype(float)))


def field_from_modes(grid: GridSpec, modes, drop_unrepresentable: bool = False) -> SpectralField:
    """Build sum_i a_i * sin(k_i . x + phase_i) as a SpectralField.

    Args:
        grid: target discretization.
        modes: iterable of (k, amplitude, phase) with k an int (1D) or a
            pair (2D).
        drop_unrepresentable: silently skip modes with |k_i| > M instead of
            raising; used by refinement studies that coarsen on purpose.
    """
    coeffs = np.zeros(grid.coeff_shape, dtype=np.complex128)
    for k, amplitude, phase in modes:
        try:
            idx = grid.index_of(k)
            ks = (k,) if grid.dim == 1 else tuple(k)
            neg_idx = grid.index_of(tuple(-ki for ki in ks) if grid.dim == 2 else -k)
        except ValueError:
            if drop_unrepresentable:
                continue
            raise
        # a*sin(theta) = (a/(2i)) e^{i theta} - (a/(2i)) e^{-i theta}
        half = amplitude * np.exp(1j * phase) / 2j
        coeffs[idx] += half
        coeffs[neg_idx] += np.conj(half)
    return SpectralField(grid, coeffs)


def zero_field(grid: GridSpec) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.coeff_shape, dtype=np.complex128))


def with_zero_mean(f: SpectralField) -> SpectralField:
    """Copy of the field with the mean-mode coefficient set to exactly zero."""
    c = f.coeffs.copy()
    c[f.grid.index_of(0 if f.grid.dim == 1 else (0, 0))] = 0.0
    return SpectralField(f.grid, c)


def require_zero_mean(f: SpectralField, tol: float = 1e-12) -> None:
    """Raise ValueError unless the mean coefficient is negligible."""
    center = f.coeffs[f.grid.index_of(0 if f.grid.dim == 1 else (0, 0))]
    scale = 1.0 + float(np.sum(np.abs(f.coeffs)))
    if abs(center) > tol * scale:
        raise ValueError(
            f"field has non-zero mean coefficient {center!r}; expected a zero-mean field"
        )


def derivative(f: SpectralField, axis: int = 0, order: int = 1) -> SpectralField:
    """Partial derivative d^order / dx_axis^order, computed mode-wise.

    The multiplier (i k)^order is assembled as i^order * k^order so that
    integer wavenumbers produce exact products.
    """
    if axis < 0 or axis >= f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim={f.grid.dim}")
    if order < 0:
        raise ValueError("order must be >= 0")
    k = f.grid.wavenumbers.astype(float)
    mult = _I_POWER[order % 4] * k**order
    if f.grid.dim == 2:
        shape = [1, 1]
        shape[axis] = k.size
        mult = mult.reshape(shape)
    return SpectralField(f.grid, f.coeffs * mult)


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * (-_plan(f.grid)["ksq"]))


def bilaplacian(f: SpectralField) -> SpectralField:
    """Biharmonic operator; multiplies coefficients by |k|^4."""
    return SpectralField(f.grid, f.coeffs * _plan(f.grid)["k4"])


def inverse_laplacian_zero_mean(f: SpectralField) -> SpectralField:
    """Solve laplacian(u) = f with zero-mean u; rejects f with nonzero mean."""
    require_zero_mean(f)
    ksq = _plan(f.grid)["ksq"]
    inv = np.zeros_like(f.coeffs)
    mask = ksq > 0
    inv[mask] = f.coeffs[mask] / (-ksq[mask])
    return SpectralField(f.grid, inv)


def wiener_norm(f: SpectralField, alpha: float = 0.0) -> float:
    """Weighted absolute-coefficient sum, sum_k |k|^alpha |c(k)|.

    Uses the 0^0 = 1 convention, so alpha = 0 includes the mean mode while
    any alpha > 0 drops it.
    """
    if alpha < 0:
        raise ValueError("wiener_norm requires alpha >= 0")
    w = _plan(f.grid)["kmag"] ** alpha
    return float(np.sum(w * np.abs(f.coeffs)))


def sobolev_norm(f: SpectralField, alpha: float = 0.0) -> float:
    """Sobolev seminorm (sum_k |k|^{2 alpha} |c(k)|^2)^{1/2}.

    Follows the same 0^0 = 1 convention as wiener_norm: the mean mode
    contributes only at alpha = 0.  Negative alpha is supported for
    zero-mean fields; the mean mode is excluded then.
    """
    kmag = _plan(f.grid)["kmag"]
    if alpha == 0:
        w = np.ones_like(kmag)
    else:
        w = np.zeros_like(kmag)
        mask = kmag > 0
        w[mask] = kmag[mask] ** (2.0 * alpha)
    return float(math.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def l2_norm(f: SpectralField) -> float:
    """L2 norm by grid quadrature; Parseval ties it to (2 pi)^{d/2} H^0."""
    return lp_norm(f, 2.0)


def lp_norm(f: SpectralField, p: float) -> float:
    """Lebesgue norm by collocation-grid quadrature; p = inf gives the max."""
    s = to_physical(f)
    if math.isinf(p):
        return float(np.max(np.abs(s)))
    if p <= 0:
        raise ValueError("lp_norm requires p > 0")
    return float((f.grid.cell_volume * np.sum(np.abs(s) ** p)) ** (1.0 / p))


def linf_norm(f: SpectralField) -> float:
    """Maximum absolute sample value on the collocation grid."""
    return float(np.max(np.abs(to_physical(f))))
