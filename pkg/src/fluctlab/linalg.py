"""Dense complex linear algebra for spectral sampling.

Core objects are plain complex128 ndarrays wrapped in light validating
containers. Eigenvalues come from the standard dense pipeline (balancing,
reduction to upper Hessenberg form, implicitly shifted QR iteration with
deflation, as provided by LAPACK's zgeev); the reduction step is also
exposed on its own. The spectral norm is computed by power iteration on
``a* a`` so no singular value decomposition is ever required.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergence

# Successive relative change at which the power iteration is declared
# converged. Tighter than the 1e-8 accuracy promise so slow geometric
# tails cannot stop the iteration three digits early.
_POWER_RTOL = 1e-11
_POWER_BUDGET = 5000

_TRACE_RTOL = 1e-9


def _as_square_complex(entries) -> np.ndarray:
    m = np.asarray(entries, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if m.shape[0] < 1:
        raise ValueError("matrix must have at least one row")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return m


@dataclass
class ComplexMatrix:
    """Square matrix with finite complex128 entries.

    Parameters
    ----------
    entries : array_like
        Square array, coerced to complex128. Non-finite entries are
        rejected.
    """

    entries: np.ndarray

    def __post_init__(self):
        self.entries = _as_square_complex(self.entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def canonical_order(values) -> np.ndarray:
    """Sort complex values by real part, ties by imaginary part."""
    v = np.asarray(values, dtype=np.complex128).ravel()
    return v[np.lexsort((v.imag, v.real))]


@dataclass
class Spectrum:
    """Full set of eigenvalues of one matrix, canonically ordered.

    The constructor sorts, so two solves of the same matrix compare
    elementwise equal regardless of the order the solver emitted.
    """

    eigenvalues: np.ndarray = field()

    def __post_init__(self):
        v = np.asarray(self.eigenvalues, dtype=np.complex128).ravel()
        if v.size < 1:
            raise ValueError("spectrum must contain at least one eigenvalue")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ValueError("eigenvalues must be finite")
        self.eigenvalues = canonical_order(v)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def radius(self) -> float:
        """Spectral radius max_k |lambda_k|."""
        return float(np.abs(self.eigenvalues).max())


def hessenberg_reduce(a: ComplexMatrix) -> ComplexMatrix:
    """Reduce ``a`` to upper Hessenberg form by Householder similarity.

    Returns H = Q* a Q with Q unitary, so the spectrum, the trace and the
    Frobenius norm are all preserved (to roundoff). Entries below the
    first subdiagonal are set to exact zeros.

    Parameters
    ----------
    a : ComplexMatrix

    Returns
    -------
    ComplexMatrix
        Upper Hessenberg matrix unitarily similar to ``a``.
    """
    h = a.entries.copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            continue
        # Reflector v maps x onto alpha e_1 with |alpha| = ||x||; the
        # phase choice avoids cancellation in v[0].
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        alpha = -phase * normx
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        # Left: rows k+1.., columns k..; right: all rows, columns k+1..
        block = h[k + 1:, k:]
        block -= 2.0 * np.outer(v, v.conj() @ block)
        block = h[:, k + 1:]
        block -= 2.0 * np.outer(block @ v, v.conj())
        h[k + 2:, k] = 0.0
    return ComplexMatrix(h)


def eigenvalues(a: ComplexMatrix) -> Spectrum:
    """Full complex spectrum of ``a``.

    1x1 input returns its entry directly. Larger matrices go through the
    dense nonsymmetric eigensolver (balancing + Hessenberg reduction +
    implicitly shifted QR with deflation). The eigenvalue sum is checked
    against the trace at Frobenius scale before the spectrum is returned.

    Raises
    ------
    NonConvergence
        If the QR iteration fails to deflate every eigenvalue, or the
        trace identity is violated beyond 1e-9 relative.
    """
    m = a.entries
    if a.n == 1:
        return Spectrum(np.array([m[0, 0]]))
    try:
        vals = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(f"eigensolver failed to converge: {exc}") from exc
    scale = 1.0 + float(np.linalg.norm(m))
    gap = abs(complex(vals.sum()) - complex(np.trace(m)))
    if gap > _TRACE_RTOL * scale:
        raise NonConvergence(
            f"eigenvalue sum deviates from trace by {gap:.3e} "
            f"(allowed {_TRACE_RTOL * scale:.3e})"
        )
    return Spectrum(vals)


def trace_power(a: ComplexMatrix, p: int) -> complex:
    """tr(a^p) by direct matrix products, for 1 <= p <= 8.

    The power is split as a^p = a^floor(p/2) a^ceil(p/2) and the trace of
    the product is accumulated elementwise, so only O(log p) full matrix
    products are formed.
    """
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= 8:
        raise ValueError(f"power must be an integer in [1, 8], got {p!r}")
    m = a.entries
    if p == 1:
        return complex(np.trace(m))
    lo = p // 2
    left = m if lo == 1 else np.linalg.matrix_power(m, lo)
    right = left if p - lo == lo else np.linalg.matrix_power(m, p - lo)
    return complex(np.sum(left * right.T))


def trace_powers(m: np.ndarray, smax: int) -> np.ndarray:
    """[tr m, tr m^2, ..., tr m^smax] sharing intermediate products.

    Bare-ndarray fast path used once per replicate; agrees with
    trace_power on every entry.
    """
    vals = np.empty(smax, dtype=np.complex128)
    m2 = None
    for s in range(1, smax + 1):
        if s == 1:
            vals[0] = np.trace(m)
        elif s == 2:
            vals[1] = np.sum(m * m.T)
        elif s <= 4:
            if m2 is None:
                m2 = m @ m
            vals[s - 1] = np.sum(m2 * (m.T if s == 3 else m2.T))
        else:
            vals[s - 1] = trace_power(ComplexMatrix(m), s)
    return vals


def _power_starts(n: int):
    # Deterministic start vectors: a dense mixed vector first, then basis
    # vectors in case the mixed start lies in the kernel.
    v = np.ones(n, dtype=np.complex128)
    v += 1j * np.linspace(0.25, 0.75, n)
    yield v / np.linalg.norm(v)
    for j in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[j] = 1.0
        yield e


def largest_singular_value(a: ComplexMatrix,
                           budget: int = _POWER_BUDGET) -> float:
    """Spectral norm ||a||_2 by power iteration on a* a.

    Deterministic (fixed start vectors, no randomness), accurate to about
    1e-8 relative on matrices with a spectral gap. The estimate sequence
    is the monotone Rayleigh sequence sigma_k = ||a v_k||.

    Raises
    ------
    NonConvergence
        If successive estimates still move after ``budget`` iterations.
        The exception carries the best (largest) estimate reached.
    """
    m = a.entries
    n = a.n
    if n == 1:
        return float(abs(m[0, 0]))
    if not m.any():
        return 0.0
    mh = m.conj().T
    for start in _power_starts(n):
        v = start
        sigma_prev = -1.0
        for k in range(budget):
            w = m @ v
            sigma = float(np.linalg.norm(w))
            if sigma == 0.0:
                break  # v in ker(a); try next start
            u = mh @ w
            nu = np.linalg.norm(u)
            if nu == 0.0:
                break
            v = u / nu
            if sigma_prev >= 0.0 and abs(sigma - sigma_prev) <= _POWER_RTOL * sigma:
                return sigma
            sigma_prev = sigma
        else:
            raise NonConvergence(
                f"power iteration still moving after {budget} iterations",
                best=sigma_prev, iterations=budget)
    # Every deterministic start fell in the kernel of a nonzero matrix;
    # cannot happen for n >= 1 since the starts span C^n.
    return 0.0
