"""Entry laws and matrix sampling.

Each ensemble draws i.i.d. complex entries with E m = 0, E m^2 = 0 and
E|m|^2 = 1, then scales the n x n entry matrix by 1/sqrt(n). Replicates
are keyed into independent counter-based streams (Philox) by
(master seed, matrix size, replicate index), so any subset of replicates
can be generated in any order, on any number of workers, with identical
bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ComplexMatrix

_MASK32 = (1 << 32) - 1
_MASK64 = (1 << 64) - 1

_SQRT2 = math.sqrt(2.0)

# The four admissible entry values of the complex sign law, in the order
# indexed by one uniform draw from {0,1,2,3}.
_SIGN_TABLE = np.array(
    [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128) / _SQRT2


@dataclass(frozen=True)
class EntryLaw:
    """A complex entry distribution and which moment conditions it meets.

    Flags record, in order: E m^2 = 0 exactly, absolute moments growing
    at most like k^(alpha k), and existence of a bounded joint density of
    (Re m, Im m). All shipped laws satisfy the first two; the two
    lattice-valued laws have no density.
    """

    name: str
    zero_square_mean: bool
    bounded_moment_growth: bool
    bounded_density: bool


LAWS = {
    law.name: law
    for law in (
        EntryLaw("complex-gaussian", True, True, True),
        EntryLaw("uniform-disk", True, True, True),
        EntryLaw("unit-circle", True, True, False),
        EntryLaw("complex-rademacher", True, True, False),
    )
}


def law_from_name(name: str) -> EntryLaw:
    try:
        return LAWS[name]
    except KeyError:
        raise ValueError(
            f"unknown entry law {name!r}; choose from {sorted(LAWS)}"
        ) from None


def replicate_stream(master_seed: int, n: int,
                     replicate_index: int) -> np.random.Generator:
    """Independent bit-reproducible stream for one replicate.

    The Philox key is the explicit word pair
    (master_seed, n << 32 | replicate_index); distinct keys give
    statistically independent streams, so sampling order and worker
    scheduling cannot affect results.
    """
    if not 0 <= master_seed <= _MASK64:
        raise ValueError("master seed must fit in 64 bits")
    if not 0 <= replicate_index <= _MASK32:
        raise ValueError("replicate index must fit in 32 bits")
    if not 0 <= n <= _MASK32:
        raise ValueError("matrix size must fit in 32 bits")
    key = np.array([master_seed, (n << 32) | replicate_index],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def law_values(law: EntryLaw, rng: np.random.Generator,
               size: int) -> np.ndarray:
    """``size`` i.i.d. draws from ``law``.

    A call of size k consumes the stream exactly as k successive calls of
    size 1, so batched and one-at-a-time sampling are interchangeable.
    """
    if law.name == "complex-gaussian":
        xy = rng.standard_normal((size, 2))
        return (xy[:, 0] + 1j * xy[:, 1]) / _SQRT2
    if law.name == "uniform-disk":
        u = rng.random((size, 2))
        r = _SQRT2 * np.sqrt(u[:, 0])
        return r * np.exp(2j * np.pi * u[:, 1])
    if law.name == "unit-circle":
        return np.exp(2j * np.pi * rng.random(size))
    if law.name == "complex-rademacher":
        return _SIGN_TABLE[rng.integers(0, 4, size=size)]
    raise ValueError(f"unknown entry law {law.name!r}")


def sample_entry(law: EntryLaw, rng: np.random.Generator) -> complex:
    """One entry draw (advances the stream by exactly one entry)."""
    return complex(law_values(law, rng, 1)[0])


@dataclass
class MatrixSample:
    """One sampled matrix together with its provenance."""

    matrix: ComplexMatrix
    law: EntryLaw
    n: int
    seed_material: tuple[int, int]  # (master seed, replicate index)

    @property
    def replicate_index(self) -> int:
        return self.seed_material[1]


def sample_matrix(law: EntryLaw, n: int, master_seed: int,
                  replicate_index: int) -> MatrixSample:
    """Draw the n x n matrix (1/sqrt(n)) (m_ij) for one replicate.

    Consumes exactly n^2 entry draws from the replicate's stream, filling
    the matrix in row-major order.
    """
    if n < 1:
        raise ValueError("matrix size must be positive")
    rng = replicate_stream(master_seed, n, replicate_index)
    entries = law_values(law, rng, n * n).reshape(n, n) / math.sqrt(n)
    return MatrixSample(ComplexMatrix(entries), law, n,
                        (master_seed, replicate_index))


def abs_moment_reference(law: EntryLaw, k: int) -> float:
    """Exact E|m|^k for the shipped laws."""
    if law.name == "complex-gaussian":
        # |m|^2 is Exp(1), so E|m|^k = Gamma(k/2 + 1).
        return math.gamma(k / 2.0 + 1.0)
    if law.name == "uniform-disk":
        return 2.0 * _SQRT2 ** k / (k + 2.0)
    if law.name in ("unit-circle", "complex-rademacher"):
        return 1.0
    raise ValueError(f"unknown entry law {law.name!r}")


@dataclass
class MomentReport:
    """Empirical low moments of an entry law against exact references."""

    law: str
    draws: int
    k_max: int
    mean: complex
    mean_se: float
    square_mean: complex
    square_mean_se: float
    abs_moments: np.ndarray        # empirical E|m|^k, k = 1..k_max
    abs_references: np.ndarray     # exact E|m|^k
    abs_ses: np.ndarray
    flags: list[str]

    @property
    def ok(self) -> bool:
        return not self.flags


def moment_selfcheck(law: EntryLaw, rng: np.random.Generator,
                     draws: int = 100_000, k_max: int = 8) -> MomentReport:
    """Check E m = 0, E m^2 = 0 and E|m|^k against exact values.

    Each comparison gets a 4-standard-error band; violations are listed
    in ``flags``. ``draws`` must be at least 10^4 and ``k_max`` at most
    12 (higher absolute moments are too noisy at desk scale).
    """
    if draws < 10_000:
        raise ValueError("selfcheck needs at least 10^4 draws")
    if not 1 <= k_max <= 12:
        raise ValueError("k_max must lie in [1, 12]")
    v = law_values(law, rng, draws)

    mean = complex(v.mean())
    mean_se = math.sqrt(float(np.mean(np.abs(v - mean) ** 2)) / draws)
    sq = v * v
    square_mean = complex(sq.mean())
    square_mean_se = math.sqrt(
        float(np.mean(np.abs(sq - square_mean) ** 2)) / draws)

    absv = np.abs(v)
    ks = np.arange(1, k_max + 1)
    powers = absv[None, :] ** ks[:, None]
    abs_moments = powers.mean(axis=1)
    abs_ses = np.sqrt(powers.var(axis=1) / draws)
    abs_refs = np.array([abs_moment_reference(law, int(k)) for k in ks])

    flags = []
    if abs(mean) > 4.0 * mean_se:
        flags.append(f"mean {mean:.3e} exceeds 4 SE ({4 * mean_se:.3e})")
    if abs(square_mean) > 4.0 * square_mean_se:
        flags.append(
            f"square mean {square_mean:.3e} exceeds 4 SE "
            f"({4 * square_mean_se:.3e})")
    for k, emp, ref, se in zip(ks, abs_moments, abs_refs, abs_ses):
        # The lattice laws have deterministic |m| = 1, hence zero SE.
        tol = 4.0 * se + 1e-12
        if abs(emp - ref) > tol:
            flags.append(
                f"E|m|^{k} = {emp:.6f} vs exact {ref:.6f} "
                f"(band {tol:.3e})")
    return MomentReport(law.name, draws, k_max, mean, mean_se, square_mean,
                        square_mean_se, abs_moments, abs_refs, abs_ses,
                        flags)
