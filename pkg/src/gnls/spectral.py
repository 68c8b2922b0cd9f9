"""Fourier analysis on the flat torus [0, 2pi)^d, d in {1, 2}.

Fields are represented by their coefficients with respect to the orthonormal
basis phi_n(x) = (2pi)^(-d/2) exp(i n.x), stored on the box |n|_inf <= n_max
in ascending lexicographic order.  With this convention Parseval reads
||u||_{L^2}^2 = sum_n |a_n|^2 and the pointwise variance of the unit-mass
random field is (2pi)^(-d) per mode.

All operations are pure; coefficient arrays may carry arbitrary leading batch
dimensions (the torus axes are always the trailing ones).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as _beta_fn
from scipy.special import betainc as _betainc

TWO_PI = 2.0 * math.pi
DEFAULT_OVERSAMPLING = 4.0

SNAPSHOT_MAGIC = b"GNLS"
SNAPSHOT_VERSION = 1


class DivergentSeriesError(ValueError):
    """Raised when an infinite spectral sum does not converge."""


@dataclass(frozen=True)
class TorusGeometry:
    """Discretization of [0, 2pi)^d: retained modes and collocation grid.

    m_grid is the number of collocation points per axis; the default places
    `oversampling` grid points per retained mode, which controls the aliasing
    error of pointwise exponential nonlinearities (their bandwidth is
    unbounded, so exact dealiasing is impossible).
    """

    d: int
    n_max: int
    m_grid: int = field(default=0)
    oversampling: float = DEFAULT_OVERSAMPLING

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if self.m_grid == 0:
            m = int(math.ceil(self.oversampling * (2 * self.n_max + 1)))
            object.__setattr__(self, "m_grid", max(m, 2 * self.n_max + 1))
        if self.m_grid < 2 * self.n_max + 1:
            raise ValueError("m_grid must be at least 2*n_max+1")
        object.__setattr__(
            self, "oversampling", self.m_grid / (2 * self.n_max + 1)
        )

    @property
    def volume(self) -> float:
        return TWO_PI**self.d

    @property
    def modes(self) -> np.ndarray:
        """Mode values -n_max..n_max along one axis."""
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def box_shape(self) -> tuple[int, ...]:
        return (2 * self.n_max + 1,) * self.d

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.m_grid,) * self.d

    @property
    def x(self) -> np.ndarray:
        """Collocation points along one axis."""
        return TWO_PI * np.arange(self.m_grid) / self.m_grid

    def mode_abs2(self) -> np.ndarray:
        """|n|^2 over the coefficient box."""
        n = self.modes
        if self.d == 1:
            return (n * n).astype(float)
        return (n * n)[:, None] + (n * n)[None, :]

    def bracket(self, power: float = 1.0) -> np.ndarray:
        """<n>^power = (1+|n|^2)^(power/2) over the box."""
        return (1.0 + self.mode_abs2()) ** (power / 2.0)

    def euclid_mask(self, n_cut: float) -> np.ndarray:
        """Boolean mask selecting |n| <= n_cut (Euclidean norm)."""
        return self.mode_abs2() <= float(n_cut) ** 2 + 1e-12

    def quad_weight(self) -> float:
        """Quadrature weight of one grid cell."""
        return (TWO_PI / self.m_grid) ** self.d


@dataclass
class SpectralField:
    """Coefficients a_n of u = sum a_n phi_n on the geometry's mode box."""

    geometry: TorusGeometry
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.geometry.box_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match "
                f"geometry box {self.geometry.box_shape}"
            )

    @classmethod
    def zero(cls, geometry: TorusGeometry) -> "SpectralField":
        return cls(geometry, np.zeros(geometry.box_shape, dtype=np.complex128))

    @classmethod
    def from_modes(
        cls, geometry: TorusGeometry, entries: dict
    ) -> "SpectralField":
        """Build a field from {mode: coefficient}; modes are ints (d=1) or tuples."""
        u = cls.zero(geometry)
        n_max = geometry.n_max
        for n, c in entries.items():
            if geometry.d == 1:
                u.coeffs[n + n_max] = c
            else:
                u.coeffs[n[0] + n_max, n[1] + n_max] = c
        return u

    def copy(self) -> "SpectralField":
        return SpectralField(self.geometry, self.coeffs.copy())

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


@dataclass
class GridField:
    """Complex values on the uniform collocation grid."""

    geometry: TorusGeometry
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.geometry.grid_shape:
            raise ValueError("value shape does not match geometry grid")


# ---------------------------------------------------------------------------
# transforms (array kernels broadcast over leading batch axes)
# ---------------------------------------------------------------------------


def _embed_indices(geometry: TorusGeometry) -> np.ndarray:
    """FFT bin of each box mode: n mod m_grid."""
    return np.mod(geometry.modes, geometry.m_grid)


def to_grid_array(geometry: TorusGeometry, coeffs: np.ndarray) -> np.ndarray:
    """Synthesize grid values from box coefficients (orthonormal basis)."""
    m = geometry.m_grid
    idx = _embed_indices(geometry)
    norm = TWO_PI ** (-geometry.d / 2.0)
    if geometry.d == 1:
        spec = np.zeros(coeffs.shape[:-1] + (m,), dtype=np.complex128)
        spec[..., idx] = coeffs
        return norm * m * np.fft.ifft(spec, axis=-1)
    spec = np.zeros(coeffs.shape[:-2] + (m, m), dtype=np.complex128)
    spec[..., idx[:, None], idx[None, :]] = coeffs
    return norm * m * m * np.fft.ifft2(spec, axes=(-2, -1))


def from_grid_array(
    geometry: TorusGeometry, values: np.ndarray, n_cut: int | None = None
) -> np.ndarray:
    """Analyze grid values into box coefficients, zeroing |n|_inf > n_cut."""
    if n_cut is None:
        n_cut = geometry.n_max
    m = geometry.m_grid
    idx = _embed_indices(geometry)
    norm = TWO_PI ** (geometry.d / 2.0)
    if geometry.d == 1:
        spec = np.fft.fft(values, axis=-1)
        coeffs = norm / m * spec[..., idx]
        if n_cut < geometry.n_max:
            keep = np.abs(geometry.modes) <= n_cut
            coeffs = np.where(keep, coeffs, 0.0)
        return coeffs
    spec = np.fft.fft2(values, axes=(-2, -1))
    coeffs = norm / (m * m) * spec[..., idx[:, None], idx[None, :]]
    if n_cut < geometry.n_max:
        keep1 = np.abs(geometry.modes) <= n_cut
        keep = keep1[:, None] & keep1[None, :]
        coeffs = np.where(keep, coeffs, 0.0)
    return coeffs


def to_grid(u: SpectralField) -> GridField:
    return GridField(u.geometry, to_grid_array(u.geometry, u.coeffs))


def from_grid(g: GridField, n_cut: int | None = None) -> SpectralField:
    return SpectralField(g.geometry, from_grid_array(g.geometry, g.values, n_cut))


# ---------------------------------------------------------------------------
# projectors and norms
# ---------------------------------------------------------------------------


def project(u: SpectralField, n_cut: float) -> SpectralField:
    """Sharp projector onto Euclidean frequencies |n| <= n_cut."""
    if n_cut < 0:
        raise ValueError("cutoff must be nonnegative")
    mask = u.geometry.euclid_mask(n_cut)
    return SpectralField(u.geometry, np.where(mask, u.coeffs, 0.0))


def _smooth_bump(r: np.ndarray) -> np.ndarray:
    """C^inf cutoff: 1 on [0,1/2], 0 on [1,inf), smooth in between."""
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    out[r <= 0.5] = 1.0
    mid = (r > 0.5) & (r < 1.0)
    s = (r[mid] - 0.5) * 2.0
    g0 = np.exp(-1.0 / (1.0 - s))
    g1 = np.exp(-1.0 / s)
    out[mid] = g0 / (g0 + g1)
    return out


def smooth_project(u: SpectralField, n_cut: float, profile=None) -> SpectralField:
    """Smooth projector: multiplies a_n by chi(|n|^2 / n_cut^2).

    The profile must equal 1 on [-1/2, 1/2] and vanish outside [-1, 1];
    the default is a standard C^inf bump.
    """
    if profile is None:
        profile = _smooth_bump
    r = u.geometry.mode_abs2() / float(n_cut) ** 2
    return SpectralField(u.geometry, u.coeffs * profile(r))


def sobolev_norm(u: SpectralField, s: float) -> float:
    """H^s norm: (sum <n>^{2s} |a_n|^2)^(1/2)."""
    w = u.geometry.bracket(2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def sobolev_norm_array(
    geometry: TorusGeometry, coeffs: np.ndarray, s: float
) -> np.ndarray:
    w = geometry.bracket(2.0 * s)
    axes = tuple(range(-geometry.d, 0))
    return np.sqrt(np.sum(w * np.abs(coeffs) ** 2, axis=axes))


# ---------------------------------------------------------------------------
# spectral sums
# ---------------------------------------------------------------------------

_DIRECT_CAP_1D = 10**6
_EM_CUTOFF = 10**5


def _tail_integral_1d(alpha: float, k: float, c: float = 1.0) -> float:
    """int_k^inf (c + x^2)^(-alpha/2) dx, exact via the incomplete Beta function."""
    a = (alpha - 1.0) / 2.0
    t = k / math.sqrt(c)
    x = 1.0 / (1.0 + t * t)
    return c ** ((1.0 - alpha) / 2.0) * 0.5 * _betainc(a, 0.5, x) * _beta_fn(a, 0.5)


def _half_line_sum(alpha: float, c: float, k_direct: int = _EM_CUTOFF) -> float:
    """sum_{n>=1} (c + n^2)^(-alpha/2) with Euler-Maclaurin tail, alpha > 1."""
    n = np.arange(1, k_direct + 1, dtype=float)
    direct = float(np.sum((c + n * n) ** (-alpha / 2.0)))
    fk = (c + k_direct**2) ** (-alpha / 2.0)
    dfk = -alpha * k_direct * (c + k_direct**2) ** (-alpha / 2.0 - 1.0)
    tail = _tail_integral_1d(alpha, k_direct, c) - 0.5 * fk - dfk / 12.0
    return direct + tail


def _lattice_sum_infinite(alpha: float, d: int) -> float:
    """sum_{n in Z^d} <n>^(-alpha); requires alpha > d."""
    if d == 1:
        return 1.0 + 2.0 * _half_line_sum(alpha, 1.0)
    # d = 2: sum over rows m of S(1+m^2) with S(c) = sum_k (c+k^2)^(-alpha/2).
    # For sqrt(c) >= 8 the row sum equals its integral A_alpha * c^((1-alpha)/2)
    # to well below 1e-16 relative (Poisson summation, corrections e^{-2 pi sqrt(c)}).
    m0 = 8
    total = 0.0
    for m in range(-m0, m0 + 1):
        c = 1.0 + m * m
        total += c ** (-alpha / 2.0) + 2.0 * _half_line_sum(alpha, c)
    a_alpha = _beta_fn((alpha - 1.0) / 2.0, 0.5)
    # outer tail: 2 * A_alpha * sum_{m > m0} (1+m^2)^((1-alpha)/2)
    beta_out = alpha - 1.0  # effective 1d exponent, > 1 since alpha > 2
    k = np.arange(m0 + 1, _EM_CUTOFF + 1, dtype=float)
    outer_direct = float(np.sum((1.0 + k * k) ** (-beta_out / 2.0)))
    fk = (1.0 + _EM_CUTOFF**2) ** (-beta_out / 2.0)
    dfk = -beta_out * _EM_CUTOFF * (1.0 + _EM_CUTOFF**2) ** (-beta_out / 2.0 - 1.0)
    outer_tail = _tail_integral_1d(beta_out, _EM_CUTOFF) - 0.5 * fk - dfk / 12.0
    total += 2.0 * a_alpha * (outer_direct + outer_tail)
    return total


def sigma(alpha: float, n_cut: float, d: int) -> float:
    """Pointwise variance (2pi)^(-d) * sum_{|n| <= n_cut} <n>^(-alpha).

    n_cut may be math.inf, in which case alpha > d is required and the series
    is summed to relative accuracy 1e-10 (direct part plus Euler-Maclaurin
    tail for d=1; nested row sums plus Poisson asymptotics for d=2).
    """
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if math.isinf(n_cut):
        if alpha <= d:
            raise DivergentSeriesError(
                f"sum of <n>^(-alpha) over Z^{d} diverges for alpha={alpha} <= d={d}"
            )
        return _lattice_sum_infinite(alpha, d) / TWO_PI**d
    if n_cut < 0:
        raise ValueError("cutoff must be nonnegative")
    n_cut = float(n_cut)
    if d == 1:
        if n_cut > _DIRECT_CAP_1D:
            raise ValueError("finite cutoff too large; use n_cut=inf")
        n = np.arange(1, int(n_cut) + 1, dtype=float)
        total = 1.0 + 2.0 * float(np.sum((1.0 + n * n) ** (-alpha / 2.0)))
        return total / TWO_PI
    if n_cut > 4000:
        raise ValueError("finite 2d cutoff too large; use n_cut=inf")
    n = np.arange(-int(n_cut), int(n_cut) + 1)
    abs2 = (n * n)[:, None] + (n * n)[None, :]
    mask = abs2 <= n_cut**2 + 1e-12
    total = float(np.sum((1.0 + abs2[mask]) ** (-alpha / 2.0)))
    return total / TWO_PI**2


def weyl_count(lam: float, d: int) -> int:
    """Number of lattice points n in Z^d with |n| <= lam."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    if d == 1:
        return 2 * int(math.floor(lam)) + 1
    if d == 2:
        n1 = np.arange(-int(math.floor(lam)), int(math.floor(lam)) + 1)
        rem = lam * lam - n1 * n1
        return int(np.sum(2 * np.floor(np.sqrt(np.maximum(rem, 0.0))) + 1))
    raise ValueError("dimension must be 1 or 2")


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------


def save_snapshot(u: SpectralField, path) -> None:
    """Write a field as magic 'GNLS', u32 LE version/d/n_max, then (re, im)
    float64 LE pairs in ascending lexicographic mode order."""
    header = SNAPSHOT_MAGIC + struct.pack(
        "<III", SNAPSHOT_VERSION, u.geometry.d, u.geometry.n_max
    )
    flat = np.ravel(u.coeffs, order="C")
    body = np.empty(2 * flat.size, dtype="<f8")
    body[0::2] = flat.real
    body[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body.tobytes())


def load_snapshot(path, oversampling: float = DEFAULT_OVERSAMPLING) -> SpectralField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError("not a GNLS snapshot (bad magic)")
    version, d, n_max = struct.unpack("<III", raw[4:16])
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    geometry = TorusGeometry(d=d, n_max=n_max, oversampling=oversampling)
    count = (2 * n_max + 1) ** d
    body = np.frombuffer(raw[16:], dtype="<f8", count=2 * count)
    coeffs = (body[0::2] + 1j * body[1::2]).reshape(geometry.box_shape)
    return SpectralField(geometry, coeffs.astype(np.complex128))
