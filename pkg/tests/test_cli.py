"""End-to-end tests driving the command line entry point in process."""

import hashlib

import pytest

from fluctlab.cli import main

CONFIG_TEXT = """\
law = complex-gaussian
n_values = 8, 16
replicates = 5
master_seed = 42
functions = 0, 1 ; 0, 0, 1
z_grid = 5+0j, 1.5+0j
contour = 5, 64
"""


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(CONFIG_TEXT)
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    """A completed sample run shared by the analyze and figures tests."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "run.cfg"
    cfg.write_text(CONFIG_TEXT)
    out = root / "raw"
    code = main(["sample", "--config", str(cfg), "--out", str(out),
                 "--quiet"])
    assert code == 0
    return out


class TestSample:
    def test_writes_records_and_spectra(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["sample", "--config", str(config_file),
                     "--out", str(out), "--quiet"]) == 0
        assert (out / "records.tsv").exists()
        assert (out / "spectra.tsv").exists()

    def test_rerun_is_byte_identical(self, config_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["sample", "--config", str(config_file),
                         "--out", str(out), "--quiet"]) == 0
        assert sha(a / "records.tsv") == sha(b / "records.tsv")
        assert sha(a / "spectra.tsv") == sha(b / "spectra.tsv")

    def test_threads_flag_never_changes_output(self, config_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sample", "--config", str(config_file), "--out", str(a),
                     "--threads", "1", "--quiet"]) == 0
        assert main(["sample", "--config", str(config_file), "--out", str(b),
                     "--threads", "8", "--quiet"]) == 0
        assert sha(a / "records.tsv") == sha(b / "records.tsv")
        assert sha(a / "spectra.tsv") == sha(b / "spectra.tsv")

    def test_seed_override_changes_output(self, config_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["sample", "--config", str(config_file), "--out", str(a),
                     "--quiet"]) == 0
        assert main(["sample", "--config", str(config_file), "--out", str(b),
                     "--seed", "43", "--quiet"]) == 0
        assert sha(a / "records.tsv") != sha(b / "records.tsv")

    def test_contour_radius_override(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["sample", "--config", str(config_file),
                     "--out", str(out), "--contour-radius", "6.5",
                     "--quiet"]) == 0
        text = (out / "records.tsv").read_text()
        assert "contour = 6.5, 64" in text

    def test_bad_config_value_exits_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text(CONFIG_TEXT.replace("5+0j, 1.5+0j", "0.5+0j"))
        assert main(["sample", "--config", str(bad), "--out",
                     str(tmp_path / "o"), "--quiet"]) == 2

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["sample", "--config", str(tmp_path / "absent.cfg"),
                     "--out", str(tmp_path / "o"), "--quiet"]) == 2


class TestAnalyze:
    def test_writes_report_files(self, finished_run, tmp_path):
        out = tmp_path / "report"
        assert main(["analyze", str(finished_run / "records.tsv"),
                     "--out", str(out), "--quiet"]) == 0
        for name in ("deviations.tsv", "normality.tsv", "sweep.tsv",
                     "summary.txt", "manifest.tsv"):
            assert (out / name).exists(), name

    def test_idempotent(self, finished_run, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["analyze", str(finished_run / "records.tsv"),
                         "--out", str(out), "--quiet"]) == 0
        for name in ("deviations.tsv", "normality.tsv", "sweep.tsv",
                     "summary.txt", "manifest.tsv"):
            assert sha(a / name) == sha(b / name), name

    def test_tampered_records_exit_2(self, finished_run, tmp_path):
        mangled = tmp_path / "records.tsv"
        lines = (finished_run / "records.tsv").read_text().splitlines()
        body = [i for i, ln in enumerate(lines) if not ln.startswith("#")]
        row = lines[body[1]].split("\t")
        lines[body[1]] = "\t".join(row[:-3])
        mangled.write_text("\n".join(lines) + "\n")
        assert main(["analyze", str(mangled), "--out",
                     str(tmp_path / "r"), "--quiet"]) == 2

    def test_missing_records_exit_2(self, tmp_path):
        assert main(["analyze", str(tmp_path / "none.tsv"),
                     "--out", str(tmp_path / "r"), "--quiet"]) == 2


class TestFigures:
    def test_writes_three_svgs(self, finished_run, tmp_path):
        out = tmp_path / "figs"
        assert main(["figures", str(finished_run / "records.tsv"),
                     "--out", str(out), "--quiet"]) == 0
        for name in ("scatter.svg", "qq.svg", "variance_trend.svg"):
            body = (out / name).read_text()
            assert body.startswith("<svg"), name
            assert "master_seed = 42" in body

    def test_qq_column_selection(self, finished_run, tmp_path):
        out = tmp_path / "figs"
        assert main(["figures", str(finished_run / "records.tsv"),
                     "--out", str(out), "--qq-column", "g0.im",
                     "--quiet"]) == 0
        assert "g0.im" in (out / "qq.svg").read_text()

    def test_unknown_qq_column_exits_2(self, finished_run, tmp_path):
        assert main(["figures", str(finished_run / "records.tsv"),
                     "--out", str(tmp_path / "f"), "--qq-column", "h9.re",
                     "--quiet"]) == 2

    def test_missing_spectra_sidecar_exits_2(self, finished_run, tmp_path):
        alone = tmp_path / "records.tsv"
        alone.write_bytes((finished_run / "records.tsv").read_bytes())
        assert main(["figures", str(alone), "--out", str(tmp_path / "f"),
                     "--quiet"]) == 2


class TestOracleCheck:
    def test_default_run_passes(self, capsys):
        assert main(["oracle-check"]) == 0
        out = capsys.readouterr().out
        assert "pass" in out
        assert "fail" not in out

    def test_coarse_quadrature_fails(self, capsys):
        assert main(["oracle-check", "--coarse"]) == 1
        captured = capsys.readouterr()
        assert "FAIL" in captured.out
        assert "identity check(s) failed" in captured.err

    def test_short_truncation_still_honest(self):
        assert main(["oracle-check", "--gaf-truncation", "1",
                     "--quiet"]) == 0


class TestUsage:
    def test_no_subcommand_exits_2(self):
        assert main([]) == 2

    def test_unknown_flag_exits_2(self):
        assert main(["sample", "--config", "x.cfg", "--bogus"]) == 2
