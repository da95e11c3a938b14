"""Seeded parallel Monte Carlo replication and moment estimation.

One replicate = sample a matrix, solve for its full spectrum, evaluate
every observable. Replicates are independent work units whose RNG
streams derive only from (master seed, n, replicate index), so the
merged record list is bitwise identical for any worker count; all
reductions run over records sorted by replicate index. Replicates whose
solves fail are flagged and excluded from estimation, never retried
(retrying would silently bias the sample); more than 1% failures aborts
the experiment after the records are persisted.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .ensembles import sample_matrix
from .errors import (
    EigenvalueOutsideContour,
    FailureBudgetExceeded,
    NonConvergence,
    PoleCollision,
)
from .linalg import Spectrum, eigenvalues, trace_powers
from .observables import (
    SpectralDiagnostics,
    cauchy_statistic,
    centered_statistic,
    esd_radial_ks,
    resolvent_sample,
    spectral_diagnostics,
)
from .oracles import limit_covariance_quadrature, resolvent_covariance

FAILURE_BUDGET = 0.01
BIAS_ALLOWANCE = 0.01     # added to mean bands at n >= 256
TRACE_POWERS = 4

_NAN = float("nan")


@dataclass
class ReplicateRecord:
    """Every observable of one replicate, or a failure marker."""

    replicate_index: int
    n: int
    diagnostics: SpectralDiagnostics | None
    statistics: list            # centered statistic per test function
    resolvent: object           # ResolventSample or None
    trace_powers: np.ndarray    # tr M^s, s = 1..TRACE_POWERS
    cauchy_gap: float           # max relative contour-vs-direct gap; nan = skipped
    esd_ks: float
    failed: bool = False
    note: str = "-"


def function_label(index: int, f) -> str:
    return f"X[{f.describe()}]"


def grid_label(z: complex) -> str:
    return f"G[{z.real:g}{z.imag:+g}j]"


def _failed_record(cfg: ExperimentConfig, n: int, index: int,
                   note: str) -> ReplicateRecord:
    return ReplicateRecord(
        index, n, None, [complex(_NAN, _NAN)] * len(cfg.functions), None,
        np.full(TRACE_POWERS, complex(_NAN, _NAN)), _NAN, _NAN,
        failed=True, note=note)


def run_replicate(cfg: ExperimentConfig, n: int, index: int) -> ReplicateRecord:
    """Compute one replicate; pure function of (cfg, n, index)."""
    try:
        sample = sample_matrix(cfg.law, n, cfg.master_seed, index)
        spec = eigenvalues(sample.matrix)
        diag = spectral_diagnostics(sample.matrix, spec, cfg.kappa)
    except NonConvergence as exc:
        return _failed_record(cfg, n, index, f"non-convergence: {exc}")
    stats = [centered_statistic(spec, f, function_label(i, f), index).value
             for i, f in enumerate(cfg.functions)]
    res = resolvent_sample(spec, cfg.z_grid, index)
    traces = trace_powers(sample.matrix.entries, TRACE_POWERS)
    gap = _NAN
    try:
        gaps = []
        for i, f in enumerate(cfg.functions):
            route = cauchy_statistic(spec, f, cfg.contour)
            gaps.append(abs(route - stats[i]) / (1.0 + abs(stats[i])))
        gap = max(gaps)
    except (EigenvalueOutsideContour, PoleCollision):
        pass  # containment failed; gap stays flagged as skipped
    return ReplicateRecord(index, n, diag, stats, res, traces, gap,
                           esd_radial_ks(spec))


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   persist: bool = True, out_dir: str | None = None,
                   progress=None) -> list:
    """All replicates for every n in cfg, merged in replicate-index order.

    Records (including failures) are persisted before the failure budget
    is enforced, so an aborted experiment still leaves its evidence on
    disk. Returns the merged record list.

    Raises
    ------
    FailureBudgetExceeded
        If more than 1% of replicates failed to solve.
    """
    tasks = [(n, r) for n in cfg.n_values for r in range(cfg.replicates)]
    spectra = {}

    def work(task):
        n, r = task
        rec = run_replicate(cfg, n, r)
        return rec

    records = []
    if threads <= 1:
        for done, task in enumerate(tasks):
            records.append(work(task))
            if progress is not None:
                progress(done + 1, len(tasks))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for done, rec in enumerate(pool.map(work, tasks)):
                records.append(rec)
                if progress is not None:
                    progress(done + 1, len(tasks))
    records.sort(key=lambda rec: (rec.n, rec.replicate_index))

    if persist:
        # For the eigenvalue-scatter figure: re-derive the spectrum of
        # replicate 0 at each n (cheap relative to the sweep itself).
        for n in cfg.n_values:
            try:
                spectra[n] = eigenvalues(
                    sample_matrix(cfg.law, n, cfg.master_seed, 0).matrix)
            except NonConvergence:
                pass
        from . import records as recmod
        recmod.write_records(cfg, records,
                             out_dir if out_dir is not None else cfg.outputs,
                             spectra)

    failed = sum(1 for rec in records if rec.failed)
    if failed > FAILURE_BUDGET * len(records):
        raise FailureBudgetExceeded(
            f"{failed} of {len(records)} replicates failed "
            f"(budget {FAILURE_BUDGET:.0%})", failed=failed,
            total=len(records))
    return records


# --- estimation ---------------------------------------------------------


@dataclass
class EstimateReport:
    """Empirical moments of a stacked complex sample matrix.

    Rows of the input are replicates; columns are coordinates (centered
    statistics, resolvent grid values, trace powers). Covariances use
    the (R-1) denominator and subtract empirical means.
    """

    labels: list
    kinds: list                 # "statistic" | "resolvent" | "trace"
    count: int                  # replicates that entered the estimate
    n: int                      # matrix size (0 when not applicable)
    mean: np.ndarray
    mean_se: np.ndarray
    conj_cov: np.ndarray        # C_ij = E (x_i - m_i) conj(x_j - m_j)
    pseudo_cov: np.ndarray      # P_ij = E (x_i - m_i) (x_j - m_j)
    var_se: np.ndarray          # SE of the diagonal of conj_cov
    skew_re: np.ndarray
    skew_im: np.ndarray
    kurt_re: np.ndarray
    kurt_im: np.ndarray

    def psd_defect(self) -> float:
        """Most negative eigenvalue of the Hermitian part of C (0 if PSD)."""
        h = 0.5 * (self.conj_cov + self.conj_cov.conj().T)
        lo = float(np.linalg.eigvalsh(h).min())
        return min(lo, 0.0)


def _skew_kurt(x: np.ndarray):
    m = x.mean()
    d = x - m
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        return 0.0, 0.0
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    return m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def estimate_moments(samples, labels=None, kinds=None,
                     n: int = 0) -> EstimateReport:
    """Mean, conjugate and pseudo covariance, and shape moments.

    ``samples`` is an (R, d) complex array (or list of length-d vectors),
    R >= 2. Standard errors: mean via sqrt(C_ii/R); variance entries via
    the fourth-moment formula sqrt((E|y|^4 - C_ii^2)/R).
    """
    x = np.asarray(samples, dtype=np.complex128)
    if x.ndim == 1:
        x = x[:, None]
    r, d = x.shape
    if r < 2:
        raise ValueError("moment estimation needs at least two replicates")
    if labels is None:
        labels = [f"x{i}" for i in range(d)]
    if kinds is None:
        kinds = ["statistic"] * d
    mean = x.mean(axis=0)
    y = x - mean
    conj_cov = (y.T @ y.conj()) / (r - 1)
    pseudo_cov = (y.T @ y) / (r - 1)
    var = np.real(np.diag(conj_cov))
    mean_se = np.sqrt(np.maximum(var, 0.0) / r)
    m4 = np.mean(np.abs(y) ** 4, axis=0)
    var_se = np.sqrt(np.maximum(m4 - var ** 2, 0.0) / r)
    sk_re = np.empty(d)
    sk_im = np.empty(d)
    ku_re = np.empty(d)
    ku_im = np.empty(d)
    for j in range(d):
        sk_re[j], ku_re[j] = _skew_kurt(x[:, j].real)
        sk_im[j], ku_im[j] = _skew_kurt(x[:, j].imag)
    return EstimateReport(list(labels), list(kinds), r, n, mean, mean_se,
                          conj_cov, pseudo_cov, var_se, sk_re, sk_im,
                          ku_re, ku_im)


def stack_records(cfg: ExperimentConfig, records, n: int):
    """(samples, labels, kinds) for the ok records at matrix size n."""
    ok = [rec for rec in records if rec.n == n and not rec.failed]
    rows = [
        list(rec.statistics)
        + list(rec.resolvent.values)
        + list(rec.trace_powers)
        for rec in ok
    ]
    labels = ([function_label(i, f) for i, f in enumerate(cfg.functions)]
              + [grid_label(z) for z in cfg.z_grid]
              + [f"tr M^{s}" for s in range(1, TRACE_POWERS + 1)])
    kinds = (["statistic"] * len(cfg.functions)
             + ["resolvent"] * len(cfg.z_grid)
             + ["trace"] * TRACE_POWERS)
    return np.asarray(rows, dtype=np.complex128), labels, kinds


# --- theory comparison --------------------------------------------------


@dataclass
class DeviationRow:
    """One empirical quantity against its limit-law value."""

    n: int
    quantity: str
    kind: str                   # "cov" | "pseudo" | "mean"
    theory: complex
    estimate: complex
    deviation: float
    se: float
    zscore: float
    flag: str                   # "-", "z>4", "exploratory", "exploratory;z>4"


def _zscore(dev: float, se: float) -> float:
    if se > 0.0:
        return dev / se
    return 0.0 if dev <= 1e-300 else math.inf


def _make_row(n, quantity, kind, theory, estimate, se, exploratory=False,
              allowance=0.0) -> DeviationRow:
    theory = complex(theory)
    estimate = complex(estimate)
    dev = abs(estimate - theory)
    z = _zscore(max(dev - allowance, 0.0), se)
    tags = []
    if exploratory:
        tags.append("exploratory")
    if z > 4.0:
        tags.append("z>4")
    return DeviationRow(n, quantity, kind, theory, estimate, dev, se, z,
                        ";".join(tags) if tags else "-")


def compare_to_theory(report: EstimateReport,
                      cfg: ExperimentConfig) -> list:
    """Deviation table: one row per (quantity, theory value).

    Covariances of centered statistics go against the disk-quadrature
    closed form; resolvent covariances against (1 - z conj(w))^{-2};
    every mean, every pseudo-covariance, and every trace moment against
    0. Mean rows at n >= 256 get a 0.01 absolute bias allowance (the
    limit theory controls the mean only asymptotically, with no rate).
    Resolvent rows involving any grid point with |z| <= 4 are tagged
    exploratory: they probe the conjectured regime beyond the proved
    contour condition.
    """
    rows = []
    idx_stat = [i for i, k in enumerate(report.kinds) if k == "statistic"]
    idx_res = [i for i, k in enumerate(report.kinds) if k == "resolvent"]
    idx_tr = [i for i, k in enumerate(report.kinds) if k == "trace"]
    n = report.n
    allowance = BIAS_ALLOWANCE if n >= 256 else 0.0
    r = report.count

    def cov_se(i, j):
        if i == j:
            return float(report.var_se[i])
        cii = float(report.conj_cov[i, i].real)
        cjj = float(report.conj_cov[j, j].real)
        return math.sqrt(max(cii * cjj, 0.0) / r)

    # Centered linear statistics: covariance, pseudo-covariance, mean.
    for a, i in enumerate(idx_stat):
        f_i = cfg.functions[a]
        for b in range(a, len(idx_stat)):
            j = idx_stat[b]
            f_j = cfg.functions[b]
            theory = limit_covariance_quadrature(f_i, f_j)
            q = f"cov({report.labels[i]}, {report.labels[j]})"
            rows.append(_make_row(n, q, "cov", theory,
                                  report.conj_cov[i, j], cov_se(i, j)))
        for b in range(a, len(idx_stat)):
            j = idx_stat[b]
            q = f"pseudo({report.labels[i]}, {report.labels[j]})"
            rows.append(_make_row(n, q, "pseudo", 0.0,
                                  report.pseudo_cov[i, j], cov_se(i, j)))
        rows.append(_make_row(n, f"mean({report.labels[i]})", "mean", 0.0,
                              report.mean[i], float(report.mean_se[i]),
                              allowance=allowance))

    # Centered resolvent on the grid.
    for a, i in enumerate(idx_res):
        z_i = cfg.z_grid[a]
        expl_i = abs(z_i) <= 4.0
        for b in range(a, len(idx_res)):
            j = idx_res[b]
            z_j = cfg.z_grid[b]
            expl = expl_i or abs(z_j) <= 4.0
            theory = resolvent_covariance(z_i, z_j)
            q = f"cov({report.labels[i]}, {report.labels[j]})"
            rows.append(_make_row(n, q, "cov", theory,
                                  report.conj_cov[i, j], cov_se(i, j),
                                  exploratory=expl))
            q = f"pseudo({report.labels[i]}, {report.labels[j]})"
            rows.append(_make_row(n, q, "pseudo", 0.0,
                                  report.pseudo_cov[i, j], cov_se(i, j),
                                  exploratory=expl))
        rows.append(_make_row(n, f"mean({report.labels[i]})", "mean", 0.0,
                              report.mean[i], float(report.mean_se[i]),
                              exploratory=expl_i, allowance=allowance))

    # Trace moments: limits vanish.
    for i in idx_tr:
        rows.append(_make_row(n, f"mean({report.labels[i]})", "mean", 0.0,
                              report.mean[i], float(report.mean_se[i]),
                              allowance=allowance))
    return rows


# --- normality ----------------------------------------------------------


@dataclass
class NormalityRow:
    label: str
    component: str              # "re" | "im"
    skewness: float
    skew_se: float
    excess_kurtosis: float
    kurt_se: float
    cdf_distance: float
    flag: str


def _normal_cdf_distance(x: np.ndarray) -> float:
    mu = float(x.mean())
    sd = float(x.std())
    if sd == 0.0:
        return 1.0
    z = np.sort((x - mu) / sd)
    cdf = 0.5 * (1.0 + np.array([math.erf(v / math.sqrt(2.0)) for v in z]))
    n = z.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    return float(max((hi - cdf).max(), (cdf - lo).max()))


def normality_diagnostics(samples, labels=None) -> list:
    """Skewness/kurtosis with exact-null standard errors, plus a CDF
    distance against a matched normal, per real coordinate.

    Needs at least 500 replicates for the moment standard errors
    (sqrt(6/R) and sqrt(24/R)) to be meaningful.
    """
    x = np.asarray(samples, dtype=np.complex128)
    if x.ndim == 1:
        x = x[:, None]
    r, d = x.shape
    if r < 500:
        raise ValueError("normality diagnostics need at least 500 samples")
    if labels is None:
        labels = [f"x{i}" for i in range(d)]
    skew_se = math.sqrt(6.0 / r)
    kurt_se = math.sqrt(24.0 / r)
    rows = []
    for j in range(d):
        for component, vals in (("re", x[:, j].real), ("im", x[:, j].imag)):
            sk, ku = _skew_kurt(np.asarray(vals, dtype=np.float64))
            flags = []
            if abs(sk) > 4.0 * skew_se:
                flags.append("skew>4SE")
            if abs(ku) > 4.0 * kurt_se:
                flags.append("kurt>4SE")
            rows.append(NormalityRow(
                labels[j], component, sk, skew_se, ku, kurt_se,
                _normal_cdf_distance(np.asarray(vals, dtype=np.float64)),
                ";".join(flags) if flags else "-"))
    return rows


# --- convergence sweep --------------------------------------------------


@dataclass
class SweepRow:
    n: int
    replicates_ok: int
    failed: int
    mean_esd_ks: float
    mean_spectral_norm: float
    mean_spectral_radius: float
    omega_fraction: float       # fraction of ok replicates inside the norm cut
    max_cov_zscore: float       # worst statistic-covariance z-score at this n


@dataclass
class SweepTable:
    rows: list
    trend_lines: list = field(default_factory=list)


def _trend(name: str, values, target: float | None,
           decreasing: bool) -> str:
    if len(values) < 3:
        return f"{name}: insufficient dimensions for a trend"
    diffs = np.diff(values)
    monotone = bool(np.all(diffs <= 0) if decreasing else np.all(diffs >= 0))
    direction = "decreasing" if decreasing else "increasing"
    line = f"{name}: {direction}={'yes' if monotone else 'no'}"
    if target is not None:
        line += (f", final={values[-1]:.4f} (limit {target:g})")
    return line


def convergence_sweep(cfg: ExperimentConfig, records=None,
                      threads: int = 1) -> SweepTable:
    """Per-n summary over replicates, plus monotone-trend lines.

    Runs the experiment when no records are passed; analysis paths pass
    existing records and never resample. Trend lines need at least three
    matrix sizes, otherwise they say so.
    """
    if records is None:
        records = run_experiment(cfg, threads=threads, persist=False)
    rows = []
    for n in cfg.n_values:
        group = [rec for rec in records if rec.n == n]
        ok = [rec for rec in group if not rec.failed]
        failed = len(group) - len(ok)
        if not ok:
            rows.append(SweepRow(n, 0, failed, _NAN, _NAN, _NAN, _NAN, _NAN))
            continue
        samples, labels, kinds = stack_records(cfg, records, n)
        report = estimate_moments(samples, labels, kinds, n)
        dev = compare_to_theory(report, cfg)
        cov_z = [row.zscore for row in dev
                 if row.kind == "cov" and "exploratory" not in row.flag
                 and row.quantity.startswith("cov(X[")]
        rows.append(SweepRow(
            n, len(ok), failed,
            float(np.mean([rec.esd_ks for rec in ok])),
            float(np.mean([rec.diagnostics.spectral_norm for rec in ok])),
            float(np.mean([rec.diagnostics.spectral_radius for rec in ok])),
            float(np.mean([1.0 if rec.diagnostics.in_omega else 0.0
                           for rec in ok])),
            max(cov_z) if cov_z else _NAN))
    trends = [
        _trend("mean esd_ks", [r.mean_esd_ks for r in rows], 0.0, True),
        _trend("mean spectral norm", [r.mean_spectral_norm for r in rows],
               2.0, True),
        _trend("mean spectral radius", [r.mean_spectral_radius for r in rows],
               1.0, True),
    ]
    return SweepTable(rows, trends)
