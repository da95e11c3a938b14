"""Tests for the SVG figure writers and the inverse normal CDF."""

import math

import numpy as np
import pytest

from fluctlab.config import ExperimentConfig
from fluctlab.ensembles import law_from_name, sample_matrix
from fluctlab.errors import SchemaError
from fluctlab.figures import (
    eigenvalue_scatter,
    normal_quantile,
    qq_figure,
    qq_points,
    variance_trend,
    write_figures,
)
from fluctlab.harness import run_experiment
from fluctlab.linalg import eigenvalues
from fluctlab.observables import Contour, TestFunction


def _phi(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


class TestNormalQuantile:
    def test_known_values(self):
        assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-15)
        assert normal_quantile(0.975) == pytest.approx(
            1.959963984540054, abs=1e-12)
        assert normal_quantile(0.84134474606854293) == pytest.approx(
            1.0, abs=1e-12)

    def test_symmetry(self):
        for p in (0.01, 0.1, 0.3, 0.45):
            assert normal_quantile(p) == pytest.approx(
                -normal_quantile(1.0 - p), abs=1e-12)

    def test_roundtrip(self):
        for p in (1e-6, 1e-3, 0.02425, 0.2, 0.5, 0.7, 0.97575, 1 - 1e-6):
            assert abs(_phi(normal_quantile(p)) - p) <= 1e-12

    def test_domain(self):
        for bad in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                normal_quantile(bad)


class TestQQPoints:
    def test_standardization(self):
        rng = np.random.default_rng(0)
        x = 3.0 + 2.0 * rng.standard_normal(4000)
        theo, emp = qq_points(x)
        assert len(theo) == len(emp) == 4000
        assert np.all(np.diff(theo) > 0)
        assert np.all(np.diff(emp) >= 0)
        # After standardization the QQ curve hugs the diagonal away
        # from the noisy extreme tails.
        lo, hi = 100, 3900
        bulk = np.abs(np.asarray(theo)[lo:hi] - np.asarray(emp)[lo:hi])
        assert np.max(bulk) < 0.2

    def test_rejects_degenerate_input(self):
        with pytest.raises(SchemaError):
            qq_points(np.array([1.0]))
        with pytest.raises(SchemaError):
            qq_points(np.full(10, 7.0))


class TestEigenvalueScatter:
    def test_most_eigenvalues_near_unit_disk(self):
        sample = sample_matrix(law_from_name("complex-gaussian"),
                               512, master_seed=1, replicate_index=0)
        spectrum = eigenvalues(sample.matrix).eigenvalues
        radii = np.abs(spectrum)
        assert np.mean(radii <= 1.1) >= 0.99
        svg = eigenvalue_scatter(spectrum, 512, "complex-gaussian", 1, "abc")
        assert svg.startswith("<svg")
        assert svg.count("<circle") >= 512

    def test_empty_spectrum_rejected(self):
        with pytest.raises(SchemaError):
            eigenvalue_scatter(np.array([], dtype=complex), 0, "x", 0, "h")

    def test_stamp_contents(self):
        svg = eigenvalue_scatter(np.array([0.5 + 0.5j]), 1, "law", 99,
                                 "deadbeef")
        assert "master_seed = 99" in svg
        assert "config_hash = deadbeef" in svg
        assert "fluctlab" in svg


class TestVarianceTrend:
    def test_renders_points_and_theory(self):
        svg = variance_trend([(64, 0.9, 0.05), (128, 0.95, 0.03),
                              (256, 1.01, 0.02)], 1.0, "var(Re X[z])",
                             7, "hash")
        assert svg.startswith("<svg")
        assert "var(Re X[z])" in svg

    def test_qq_figure_renders(self):
        rng = np.random.default_rng(5)
        svg = qq_figure(rng.standard_normal(600), "f0.re", 7, "hash")
        assert svg.startswith("<svg")
        assert "f0.re" in svg


class TestWriteFigures:
    def test_files_and_stamps(self, tmp_path):
        cfg = ExperimentConfig(
            n_values=(8, 16), replicates=6, master_seed=11,
            functions=(TestFunction((0.0, 1.0)),),
            z_grid=(5 + 0j,), contour=Contour(5.0, 64),
            outputs=str(tmp_path))
        records = run_experiment(cfg, persist=True, out_dir=str(tmp_path))
        from fluctlab.records import read_spectra
        spectra = read_spectra(str(tmp_path / "spectra.tsv"))
        write_figures(cfg, records, spectra, str(tmp_path))
        for name in ("scatter.svg", "qq.svg", "variance_trend.svg"):
            body = (tmp_path / name).read_text()
            assert body.startswith("<svg"), name
            assert "master_seed = 11" in body, name
