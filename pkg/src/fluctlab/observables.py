"""Per-sample spectral observables.

Everything here is a pure function of a computed spectrum (plus
parameters): linear statistics of polynomial test functions, their
centered versions, the centered resolvent trace, the contour-integral
route to the same centered statistic, circular-law distance, and
norm/radius diagnostics. Matrix inversion never appears; resolvent
traces are sums over eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import EigenvalueOutsideContour, PoleCollision
from .linalg import ComplexMatrix, Spectrum, largest_singular_value

_POLE_TOL = 1e-12
_CONTAIN_TOL = 1e-9

DEFAULT_KAPPA = 2.5
DEFAULT_CONTOUR_NODES = 512


def _format_term(c: complex, j: int) -> str:
    if j == 0:
        base = ""
    elif j == 1:
        base = "z"
    else:
        base = f"z^{j}"
    if c == 1 and j > 0:
        return base
    cs = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
    return cs + base


@dataclass(frozen=True)
class TestFunction:
    """Polynomial test function f(z) = sum_j c_j z^j.

    Coefficients are stored lowest degree first; trailing zeros are
    stripped (a constant keeps one coefficient).
    """

    __test__ = False  # not a test case despite the class name

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("a test function needs at least one coefficient")
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def f0(self) -> complex:
        """f(0)."""
        return self.coefficients[0]

    def evaluate(self, z):
        """Horner evaluation; accepts scalars or arrays."""
        return npoly.polyval(z, np.asarray(self.coefficients))

    def derivative(self) -> "TestFunction":
        c = self.coefficients
        if len(c) == 1:
            return TestFunction((0j,))
        return TestFunction(tuple(j * c[j] for j in range(1, len(c))))

    def describe(self) -> str:
        terms = [_format_term(c, j)
                 for j, c in enumerate(self.coefficients) if c != 0]
        return " + ".join(terms) if terms else "0"


@dataclass(frozen=True)
class Contour:
    """Origin-centered circle |z| = radius with equispaced nodes."""

    radius: float
    node_count: int = DEFAULT_CONTOUR_NODES

    def __post_init__(self):
        if not self.radius > 1.0:
            raise ValueError("contour radius must exceed 1")
        if self.node_count < 64 or self.node_count % 2:
            raise ValueError("node count must be even and at least 64")

    def nodes(self) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(self.node_count) / self.node_count
        return self.radius * np.exp(1j * theta)


@dataclass
class LinearStatisticSample:
    """Centered linear statistic X_N(f) - N f(0) for one replicate."""

    value: complex
    n: int
    function_id: str
    replicate_index: int = -1

    def __post_init__(self):
        self.value = complex(self.value)
        if not (math.isfinite(self.value.real)
                and math.isfinite(self.value.imag)):
            raise ValueError("statistic value must be finite")


@dataclass
class ResolventSample:
    """Centered resolvent trace values on a grid outside the unit disk."""

    grid: np.ndarray
    values: np.ndarray
    n: int
    replicate_index: int = -1

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.complex128)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have equal length")
        if np.any(np.abs(self.grid) <= 1.0):
            raise ValueError("every grid point must satisfy |z| > 1")


def linear_statistic(spec: Spectrum, f: TestFunction) -> complex:
    """X_N(f) = sum_k f(lambda_k)."""
    return complex(np.sum(f.evaluate(spec.eigenvalues)))


def centered_statistic(spec: Spectrum, f: TestFunction,
                       function_id: str | None = None,
                       replicate_index: int = -1) -> LinearStatisticSample:
    """X_N(f) - N f(0).

    The subtraction implements the mean of the limiting law: for f
    analytic, the disk average (1/pi) integral of f over the unit disk
    equals f(0), so N f(0) is the deterministic first-order term.
    """
    value = linear_statistic(spec, f) - spec.n * f.f0
    return LinearStatisticSample(
        value, spec.n,
        function_id if function_id is not None else f.describe(),
        replicate_index)


def _resolvent_values(spec: Spectrum, zs: np.ndarray) -> np.ndarray:
    lam = spec.eigenvalues
    if np.any(np.abs(zs) < _POLE_TOL):
        raise PoleCollision("resolvent centering term has a pole at z = 0")
    diffs = zs[:, None] - lam[None, :]
    dist = np.abs(diffs)
    if dist.min() < _POLE_TOL:
        flat = int(dist.argmin())
        zi, li = divmod(flat, lam.size)
        raise PoleCollision(
            f"evaluation point {zs[zi]} within {_POLE_TOL} of eigenvalue "
            f"{lam[li]}")
    return np.sum(1.0 / diffs, axis=1) - spec.n / zs


def resolvent_fluctuation(spec: Spectrum, z: complex) -> complex:
    """Centered resolvent trace sum_k 1/(z - lambda_k) - n/z.

    Raises
    ------
    PoleCollision
        If z is within 1e-12 of an eigenvalue or of the origin.
    """
    return complex(_resolvent_values(spec, np.array([z],
                                                    dtype=np.complex128))[0])


def resolvent_sample(spec: Spectrum, grid,
                     replicate_index: int = -1) -> ResolventSample:
    """Centered resolvent trace at every grid point (one replicate)."""
    zs = np.asarray(grid, dtype=np.complex128).ravel()
    return ResolventSample(zs, _resolvent_values(spec, zs), spec.n,
                           replicate_index)


def cauchy_statistic(spec: Spectrum, f: TestFunction,
                     contour: Contour) -> complex:
    """Centered statistic via the contour route (1/2 pi i) oint f G_N dz.

    Valid on the event that the whole spectrum lies strictly inside the
    contour; the integrand is then analytic in an annulus around the
    circle, so the trapezoid rule converges geometrically in the node
    count and the result matches centered_statistic to roundoff.

    Raises
    ------
    EigenvalueOutsideContour
        If any |lambda_k| >= radius - 1e-9 (the containment-failure
        pathway made explicit).
    PoleCollision
        If an eigenvalue sits within 1e-12 of a contour node; the
        sample's check is aborted rather than the contour perturbed.
    """
    moduli = np.abs(spec.eigenvalues)
    mask = moduli >= contour.radius - _CONTAIN_TOL
    if np.any(mask):
        offenders = spec.eigenvalues[mask]
        raise EigenvalueOutsideContour(
            f"{offenders.size} eigenvalue(s) on or outside |z| = "
            f"{contour.radius}: " + ", ".join(
                f"{v:.6f}" for v in offenders[:4]) +
            ("..." if offenders.size > 4 else ""),
            offenders=offenders)
    z = contour.nodes()
    g = _resolvent_values(spec, z)
    # oint h(z) dz with z = rho e^{i theta}: dz = i z dtheta, so
    # (1/2 pi i) oint f G dz = mean_j z_j f(z_j) G(z_j).
    return complex(np.mean(z * f.evaluate(z) * g))


def esd_radial_ks(spec: Spectrum) -> float:
    """KS distance between the law of |lambda|^2 and Uniform[0,1].

    Under the circular law the squared moduli are asymptotically uniform
    on [0,1]; mass outside the unit disk is clamped to 1 and shows up as
    deficit at the right edge.
    """
    if spec.n < 2:
        raise ValueError("KS distance needs at least two eigenvalues")
    u = np.sort(np.clip(np.abs(spec.eigenvalues) ** 2, 0.0, 1.0))
    n = u.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max((grid_hi - u).max(), (u - grid_lo).max()))


@dataclass
class SpectralDiagnostics:
    """Norm/radius diagnostics for one sample."""

    spectral_norm: float
    spectral_radius: float
    kappa: float
    in_omega: bool


def spectral_diagnostics(m: ComplexMatrix, spec: Spectrum,
                         kappa: float = DEFAULT_KAPPA) -> SpectralDiagnostics:
    """Spectral norm (power iteration), spectral radius, and whether the
    sample lies in the good event {norm < kappa}.

    ``kappa`` must exceed 2, the almost-sure limit of the norm.
    Propagates NonConvergence from the norm computation.
    """
    if not kappa > 2.0:
        raise ValueError("kappa must exceed 2")
    norm = largest_singular_value(m)
    return SpectralDiagnostics(norm, spec.radius, kappa, norm < kappa)


def default_resolvent_grid(outer: float = 5.0, inner: float = 1.5,
                           per_circle: int = 8) -> np.ndarray:
    """Default evaluation grid: equispaced points on |z| = outer (theorem
    regime) and |z| = inner (conjectured regime)."""
    theta = 2.0 * np.pi * np.arange(per_circle) / per_circle
    ring = np.exp(1j * theta)
    return np.concatenate([outer * ring, inner * ring])
