"""Acceptance suite.

Each test exercises one advertised guarantee of the package at its
stated tolerance and prints a single pass/fail line. The Monte Carlo
checks share one complex-gaussian run at n = 256 with 2000 replicates;
the remaining checks use exact identities, closed-form oracles, or
dedicated short runs. The inner-grid covariance probe (test 05) is
exploratory: its line is printed for the record but it never fails
the suite.
"""

import hashlib
import math

import numpy as np
import pytest

from fluctlab.cli import main
from fluctlab.config import ExperimentConfig
from fluctlab.ensembles import law_from_name, sample_matrix
from fluctlab.harness import (
    estimate_moments,
    normality_diagnostics,
    run_experiment,
    stack_records,
)
from fluctlab.linalg import ComplexMatrix, eigenvalues, trace_power
from fluctlab.observables import Contour, TestFunction, cauchy_statistic, \
    centered_statistic
from fluctlab.oracles import (
    GafConfig,
    bergman_identity_check,
    contour_covariance_identity,
    gaf_covariance_truncated,
    gaf_sample,
    resolvent_covariance,
)

F_Z = TestFunction((0.0, 1.0))
F_Z2 = TestFunction((0.0, 0.0, 1.0))
F_SUM = TestFunction((0.0, 1.0, 1.0))

# Column layout of stack_records for the shared run below:
# 0: X[z]  1: X[z^2]  2: G[5+0j]  3: G[1.5+0j]  4..7: tr M^1..4
COL_XZ, COL_XZ2, COL_G5, COL_G15, COL_TR1 = 0, 1, 2, 3, 4


def report(tag: str, ok: bool, detail: str) -> bool:
    print(f"acceptance {tag}: {'PASS' if ok else 'FAIL'}  ({detail})",
          flush=True)
    return ok


@pytest.fixture(scope="module")
def bulk():
    """Shared complex-gaussian run: n = 256, 2000 replicates."""
    cfg = ExperimentConfig(
        n_values=(256,), replicates=2000, master_seed=7,
        functions=(F_Z, F_Z2), z_grid=(5 + 0j, 1.5 + 0j),
        contour=Contour(5.0, 512))
    records = run_experiment(cfg, threads=8, persist=False)
    samples, labels, kinds = stack_records(cfg, records, 256)
    assert samples.shape[0] == 2000
    est = estimate_moments(samples, labels, kinds, 256)
    return cfg, records, samples, est


def test_01_contour_route_matches_direct_statistic():
    law = law_from_name("complex-gaussian")
    contour = Contour(5.0, 512)
    worst = 0.0
    for index in range(100):
        sample = sample_matrix(law, 128, master_seed=101,
                               replicate_index=index)
        spec = eigenvalues(sample.matrix)
        for f in (F_Z, F_Z2):
            direct = centered_statistic(spec, f).value
            via_contour = cauchy_statistic(spec, f, contour)
            worst = max(worst,
                        abs(via_contour - direct) / (1.0 + abs(direct)))
    ok = worst <= 1e-8
    assert report("01 contour-route-vs-direct-statistic", ok,
                  f"max normalized gap {worst:.3e} over 100 samples")


def test_02_monomial_variances(bulk):
    _, _, _, est = bulk
    var_z = est.conj_cov[COL_XZ, COL_XZ].real
    var_z2 = est.conj_cov[COL_XZ2, COL_XZ2].real
    cross = abs(est.conj_cov[COL_XZ, COL_XZ2])
    ok = (0.9 <= var_z <= 1.1 and 1.7 <= var_z2 <= 2.3 and cross <= 0.15)
    assert report(
        "02 monomial-variances", ok,
        f"var X[z] {var_z:.4f} in [0.9, 1.1]; "
        f"var X[z^2] {var_z2:.4f} in [1.7, 2.3]; |cross| {cross:.4f}")


def test_03_pseudo_covariance_vanishes(bulk):
    _, _, _, est = bulk
    p_zz = abs(est.pseudo_cov[COL_XZ, COL_XZ])
    p_zz2 = abs(est.pseudo_cov[COL_XZ, COL_XZ2])
    ok = p_zz <= 0.15 and p_zz2 <= 0.15
    assert report("03 pseudo-covariance-vanishes", ok,
                  f"|E X[z]^2| {p_zz:.4f}, |E X[z] X[z^2]| {p_zz2:.4f}, "
                  f"both <= 0.15")


def test_04_resolvent_covariance_outer_point(bulk):
    _, _, _, est = bulk
    target = 1.0 / 576.0
    got = est.conj_cov[COL_G5, COL_G5].real
    mean_ok = abs(est.mean[COL_G5]) <= 4.0 * est.mean_se[COL_G5] + 0.01
    cov_ok = abs(got - target) <= 0.20 * target
    ok = cov_ok and mean_ok
    assert report(
        "04 resolvent-covariance-at-5", ok,
        f"cov {got:.6f} vs 1/576 = {target:.6f} (within 20%); "
        f"|mean| {abs(est.mean[COL_G5]):.5f} <= "
        f"{4.0 * est.mean_se[COL_G5] + 0.01:.5f}")


def test_05_resolvent_covariance_inner_point_exploratory(bulk):
    _, _, _, est = bulk
    target = 0.64
    got = est.conj_cov[COL_G15, COL_G15].real
    ok = abs(got - target) <= 0.25 * target
    report("05 resolvent-covariance-at-1.5 [exploratory]", ok,
           f"cov {got:.4f} vs conjectured {target:.4f} (25% band); "
           f"informational only")
    # Exploratory probe: recorded, never asserted.


def test_06_gaf_series_matches_resolvent_covariance():
    values = (1.5, 2.0, 3.0, 5.0, 10.0)
    worst_excess = -math.inf
    for z in values:
        for w in values:
            partial, tail = gaf_covariance_truncated(512, z, w)
            exact = resolvent_covariance(z, w)
            worst_excess = max(worst_excess, abs(partial - exact) - tail)
    series_ok = worst_excess <= 0.0

    rng = np.random.default_rng(606)
    draws = np.array([gaf_sample(GafConfig(512), [5.0 + 0j], rng)[0]
                      for _ in range(10_000)])
    mc_cov = float(np.mean(np.abs(draws) ** 2))
    target = 1.0 / 576.0
    mc_ok = abs(mc_cov - target) <= 0.10 * target
    ok = series_ok and mc_ok
    assert report(
        "06 gaf-series-consistency", ok,
        f"series gap minus tail bound {worst_excess:.2e} <= 0 on 5x5 grid; "
        f"mc cov {mc_cov:.6f} within 10% of {target:.6f}")


def test_07_kernel_identities():
    worst_bergman = max(
        bergman_identity_check(z, w).gap
        for z in (2.0, 3.0, 5.0) for w in (2.0, 3.0, 5.0))
    contour = Contour(2.0, 512)
    worst_contour = max(
        contour_covariance_identity(f, g, contour).gap
        for f in (F_Z, F_Z2, F_SUM) for g in (F_Z, F_Z2, F_SUM))
    ok = worst_bergman <= 1e-4 and worst_contour <= 1e-6
    assert report(
        "07 kernel-identities", ok,
        f"bergman max gap {worst_bergman:.2e} <= 1e-4; "
        f"contour max gap {worst_contour:.2e} <= 1e-6")


def test_08_circular_law_and_norms():
    cfg = ExperimentConfig(
        n_values=(1024,), replicates=50, master_seed=88,
        functions=(F_Z,), z_grid=(5 + 0j,), contour=Contour(5.0, 64))
    records = run_experiment(cfg, threads=8, persist=False)
    ok_records = [r for r in records if not r.failed]
    ks = ok_records[0].esd_ks
    norms = np.array([r.diagnostics.spectral_norm for r in ok_records])
    radii = np.array([r.diagnostics.spectral_radius for r in ok_records])
    outside = np.mean([not r.diagnostics.in_omega for r in ok_records])
    ok = (len(ok_records) == 50 and ks <= 0.05
          and 1.85 <= norms.mean() <= 2.25
          and 0.92 <= radii.mean() <= 1.12
          and outside < 0.02)
    assert report(
        "08 circular-law-and-norms", ok,
        f"ks {ks:.4f} <= 0.05; mean norm {norms.mean():.4f} in "
        f"[1.85, 2.25]; mean radius {radii.mean():.4f} in [0.92, 1.12]; "
        f"outside fraction {outside:.3f} < 0.02")


def test_09_trace_moments_vanish(bulk):
    _, _, _, est = bulk
    details = []
    ok = True
    for s in (1, 2, 3):
        j = COL_TR1 + s - 1
        bound = 4.0 * est.mean_se[j]
        ok = ok and abs(est.mean[j]) <= bound
        details.append(f"|tr M^{s}| {abs(est.mean[j]):.4f} <= {bound:.4f}")
    assert report("09 trace-moments-vanish", ok, "; ".join(details))


def test_10_statistic_normality(bulk):
    _, _, samples, _ = bulk
    col = samples[:, COL_XZ]
    rows = normality_diagnostics(samples[:, COL_XZ:COL_XZ + 1],
                                 labels=["X[z]"])
    moment_ok = all(
        abs(row.skewness) <= 4.0 * row.skew_se
        and abs(row.excess_kurtosis) <= 4.0 * row.kurt_se
        for row in rows)
    ratio = float(np.var(col.real) / np.var(col.imag))
    ratio_ok = 0.8 <= ratio <= 1.25
    ok = moment_ok and ratio_ok
    worst_skew = max(abs(r.skewness) / r.skew_se for r in rows)
    worst_kurt = max(abs(r.excess_kurtosis) / r.kurt_se for r in rows)
    assert report(
        "10 statistic-normality", ok,
        f"max |skew|/se {worst_skew:.2f} <= 4; max |kurt|/se "
        f"{worst_kurt:.2f} <= 4; re/im variance ratio {ratio:.3f}")


def _poly_eval(coeffs, x):
    """Monic polynomial x^d + sum_k coeffs[k] x^k evaluated by Horner."""
    y = np.ones_like(x)
    for c in reversed(coeffs):
        y = y * x + c
    return y


def _root_oracle(coeffs):
    """All roots by simultaneous Weierstrass iteration, Newton polished.

    Independent of the eigenvalue route: works directly on the
    polynomial, so agreement with companion-matrix eigenvalues is a
    genuine cross-check of the solver.
    """
    deg = len(coeffs)
    scale = 1.0 + max(abs(c) for c in coeffs)
    roots = scale * (0.4 + 0.9j) ** np.arange(deg)
    for _ in range(500):
        prev = roots.copy()
        for i in range(deg):
            others = np.delete(roots, i)
            denom = np.prod(roots[i] - others)
            roots[i] = roots[i] - _poly_eval(coeffs, roots[i]) / denom
        if np.max(np.abs(roots - prev)) < 1e-13 * scale:
            break
    dcoeffs = [coeffs[k] * k for k in range(1, deg)] + [float(deg)]

    def dp(x):
        y = np.zeros_like(x)
        for c in reversed(dcoeffs):
            y = y * x + c
        return y

    for _ in range(3):
        roots = roots - _poly_eval(coeffs, roots) / dp(roots)
    return roots


def _companion_roots(coeffs):
    deg = len(coeffs)
    c = np.zeros((deg, deg), dtype=complex)
    c[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    c[:, deg - 1] = [-a for a in coeffs]
    return eigenvalues(ComplexMatrix(c)).eigenvalues


def test_11_eigensolver_suite():
    rng = np.random.default_rng(1111)
    worst_resid = 0.0
    for _ in range(1000):
        entries = (rng.standard_normal((64, 64))
                   + 1j * rng.standard_normal((64, 64))) / math.sqrt(2.0)
        m = ComplexMatrix(entries)
        spec = eigenvalues(m)
        for p in (1, 2):
            lhs = np.sum(spec.eigenvalues ** p)
            rhs = trace_power(m, p)
            worst_resid = max(worst_resid,
                              abs(lhs - rhs) / max(1.0, abs(rhs)))
    resid_ok = worst_resid <= 1e-9

    worst_root = 0.0
    for trial in range(20):
        coeffs = list(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        via_matrix = list(_companion_roots(coeffs))
        oracle = list(_root_oracle(coeffs))
        for root in via_matrix:
            dists = [abs(root - r) for r in oracle]
            j = int(np.argmin(dists))
            worst_root = max(worst_root, dists[j])
            oracle.pop(j)
    root_ok = worst_root <= 1e-8
    ok = resid_ok and root_ok
    assert report(
        "11 eigensolver-suite", ok,
        f"max trace residual {worst_resid:.2e} <= 1e-9 over 1000 "
        f"matrices; max root gap {worst_root:.2e} <= 1e-8 over 20 "
        f"degree-8 polynomials")


def test_12_thread_count_never_changes_bytes(tmp_path):
    cfg_text = (
        "law = complex-gaussian\n"
        "n_values = 8, 16\n"
        "replicates = 6\n"
        "master_seed = 42\n"
        "functions = 0, 1 ; 0, 0, 1\n"
        "z_grid = 5+0j, 1.5+0j\n"
        "contour = 5, 64\n")
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(cfg_text)
    outs = {}
    for threads in (1, 8):
        raw = tmp_path / f"raw{threads}"
        rep = tmp_path / f"rep{threads}"
        assert main(["sample", "--config", str(cfg_file), "--out", str(raw),
                     "--threads", str(threads), "--quiet"]) == 0
        assert main(["analyze", str(raw / "records.tsv"), "--out", str(rep),
                     "--quiet"]) == 0
        assert main(["figures", str(raw / "records.tsv"), "--out", str(rep),
                     "--quiet"]) == 0
        digest = {}
        for sub, name in [(raw, "records.tsv"), (raw, "spectra.tsv"),
                          (rep, "deviations.tsv"), (rep, "normality.tsv"),
                          (rep, "sweep.tsv"), (rep, "summary.txt"),
                          (rep, "manifest.tsv"), (rep, "scatter.svg"),
                          (rep, "qq.svg"), (rep, "variance_trend.svg")]:
            digest[name] = hashlib.sha256(
                (sub / name).read_bytes()).hexdigest()
        outs[threads] = digest
    mismatched = [name for name in outs[1] if outs[1][name] != outs[8][name]]
    ok = not mismatched
    assert report(
        "12 thread-count-determinism", ok,
        "10 persisted files byte-identical at --threads 1 vs 8"
        if ok else f"mismatch in {mismatched}")
