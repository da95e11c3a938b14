"""Line-oriented persistence for replicate records and analysis reports.

Every file is delimited text: ``#`` header lines carrying the code
version, master seed, and config hash, one ``# schema:`` line naming the
columns, then tab-separated data rows with floats rendered at 17
significant digits. No timestamps and no environment-dependent content,
so rewriting the same experiment produces byte-identical files.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash, g17, parse_config, serialize_config
from .errors import SchemaError
from .harness import (
    ReplicateRecord,
    SweepTable,
    TRACE_POWERS,
    compare_to_theory,
    convergence_sweep,
    estimate_moments,
    normality_diagnostics,
    stack_records,
)
from .observables import ResolventSample, SpectralDiagnostics

VERSION_STRING = f"fluctlab {__version__}"

RECORDS_NAME = "records.tsv"
SPECTRA_NAME = "spectra.tsv"
DEVIATIONS_NAME = "deviations.tsv"
NORMALITY_NAME = "normality.tsv"
SWEEP_NAME = "sweep.tsv"
SUMMARY_NAME = "summary.txt"
MANIFEST_NAME = "manifest.tsv"

_FIXED_COLUMNS = ("status", "replicate_index", "n", "spectral_norm",
                  "spectral_radius", "in_omega", "esd_ks", "cauchy_gap")


def sha256_of(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _header(kind: str, master_seed: int, cfg_hash: str):
    return [
        f"# {kind} v1",
        f"# version = {VERSION_STRING}",
        f"# master_seed = {master_seed}",
        f"# config_hash = {cfg_hash}",
    ]


def record_schema(cfg: ExperimentConfig):
    """Column names of a records file for this configuration."""
    cols = list(_FIXED_COLUMNS)
    for s in range(1, TRACE_POWERS + 1):
        cols += [f"tr{s}_re", f"tr{s}_im"]
    for i in range(len(cfg.functions)):
        cols += [f"f{i}_re", f"f{i}_im"]
    for j in range(len(cfg.z_grid)):
        cols += [f"g{j}_re", f"g{j}_im"]
    cols.append("note")
    return cols


def _sanitize_note(note: str) -> str:
    out = " ".join(str(note).split())
    return out if out else "-"


def _record_row(rec: ReplicateRecord, cfg: ExperimentConfig) -> str:
    if rec.failed or rec.diagnostics is None:
        norm = radius = "nan"
        in_omega = "0"
    else:
        norm = g17(rec.diagnostics.spectral_norm)
        radius = g17(rec.diagnostics.spectral_radius)
        in_omega = "1" if rec.diagnostics.in_omega else "0"
    fields = ["failed" if rec.failed else "ok", str(rec.replicate_index),
              str(rec.n), norm, radius, in_omega, g17(rec.esd_ks),
              g17(rec.cauchy_gap)]
    for s in range(TRACE_POWERS):
        value = complex(rec.trace_powers[s])
        fields += [g17(value.real), g17(value.imag)]
    for value in rec.statistics:
        value = complex(value)
        fields += [g17(value.real), g17(value.imag)]
    if rec.resolvent is None:
        fields += ["nan", "nan"] * len(cfg.z_grid)
    else:
        for value in rec.resolvent.values:
            value = complex(value)
            fields += [g17(value.real), g17(value.imag)]
    fields.append(_sanitize_note(rec.note))
    return "\t".join(fields)


def write_records(cfg: ExperimentConfig, records, out_dir: str,
                  spectra=None):
    """Persist replicate records (and the figure spectra sidecar).

    Returns the paths written. Records are written in (n, replicate)
    order regardless of input order.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg_hash = config_hash(cfg)
    lines = _header("replicate-records", cfg.master_seed, cfg_hash)
    for line in serialize_config(cfg, include_outputs=False).splitlines():
        lines.append(f"# config: {line}")
    lines.append("# schema: " + "\t".join(record_schema(cfg)))
    for rec in sorted(records, key=lambda r: (r.n, r.replicate_index)):
        lines.append(_record_row(rec, cfg))
    records_path = os.path.join(out_dir, RECORDS_NAME)
    _write_lines(records_path, lines)

    paths = [records_path]
    if spectra is not None:
        lines = _header("spectra", cfg.master_seed, cfg_hash)
        lines.append("# schema: n\treplicate_index\tindex\tre\tim")
        for n in sorted(spectra):
            for k, lam in enumerate(spectra[n].eigenvalues):
                lam = complex(lam)
                lines.append(f"{n}\t0\t{k}\t{g17(lam.real)}\t{g17(lam.imag)}")
        spectra_path = os.path.join(out_dir, SPECTRA_NAME)
        _write_lines(spectra_path, lines)
        paths.append(spectra_path)
    return paths


def _parse_float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise SchemaError(f"line {lineno}: cannot parse '{token}' as a number")


def read_records(path: str):
    """Parse a records file back into (config, records, metadata).

    The embedded config echo is re-parsed and its hash checked against
    the recorded one; the schema line and every row's field count are
    validated against that config.

    Raises
    ------
    SchemaError
        Naming the first offending line.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read records file: {exc}")
    meta = {}
    config_lines = []
    schema_line = None
    schema_lineno = 0
    data = []
    for lineno, line in enumerate(raw, start=1):
        if not line.strip():
            continue
        if line.startswith("# schema:"):
            schema_line = line[len("# schema:"):].strip()
            schema_lineno = lineno
        elif line.startswith("# config:"):
            config_lines.append(line[len("# config:"):].strip())
        elif line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            elif not meta.get("kind"):
                meta["kind"] = body
        else:
            data.append((lineno, line))
    if meta.get("kind") != "replicate-records v1":
        raise SchemaError("line 1: not a replicate-records v1 file")
    if schema_line is None:
        raise SchemaError("missing '# schema:' line")
    if not config_lines:
        raise SchemaError("missing '# config:' echo lines")
    cfg = parse_config("\n".join(config_lines))
    cfg.outputs = os.path.dirname(os.path.abspath(path))
    recorded_hash = meta.get("config_hash", "")
    if recorded_hash != config_hash(cfg):
        raise SchemaError("config_hash does not match the embedded config")

    expected = record_schema(cfg)
    found = schema_line.split("\t")
    if found != expected:
        raise SchemaError(
            f"line {schema_lineno}: schema mismatch, expected "
            f"{len(expected)} columns starting {expected[:3]}, "
            f"found {len(found)}")
    if not data:
        raise SchemaError("no replicates in records file")

    records = []
    for lineno, line in data:
        fields = line.split("\t")
        if len(fields) != len(expected):
            raise SchemaError(f"line {lineno}: expected {len(expected)} "
                              f"fields, found {len(fields)}")
        status = fields[0]
        if status not in ("ok", "failed"):
            raise SchemaError(f"line {lineno}: unknown status '{status}'")
        try:
            rep = int(fields[1])
            n = int(fields[2])
        except ValueError:
            raise SchemaError(f"line {lineno}: bad replicate_index or n")
        vals = [_parse_float(tok, lineno) for tok in fields[3:-1]]
        note = fields[-1]
        failed = status == "failed"
        norm, radius, in_omega, esd_ks, cauchy_gap = vals[:5]
        cursor = 5
        traces = []
        for _ in range(TRACE_POWERS):
            traces.append(complex(vals[cursor], vals[cursor + 1]))
            cursor += 2
        stats = []
        for _ in range(len(cfg.functions)):
            stats.append(complex(vals[cursor], vals[cursor + 1]))
            cursor += 2
        grid_vals = []
        for _ in range(len(cfg.z_grid)):
            grid_vals.append(complex(vals[cursor], vals[cursor + 1]))
            cursor += 2
        if failed:
            diag = None
            resolvent = None
        else:
            diag = SpectralDiagnostics(norm, radius, cfg.kappa,
                                       bool(int(in_omega)))
            resolvent = ResolventSample(
                np.asarray(cfg.z_grid, dtype=np.complex128),
                np.asarray(grid_vals, dtype=np.complex128), rep)
        records.append(ReplicateRecord(
            rep, n, diag, stats, resolvent,
            np.asarray(traces, dtype=np.complex128), cauchy_gap, esd_ks,
            failed=failed, note=note))
    return cfg, records, meta


def read_spectra(path: str):
    """Parse the spectra sidecar into {n: complex eigenvalue array}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read spectra file: {exc}")
    out = {}
    for lineno, line in enumerate(raw, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise SchemaError(f"line {lineno}: expected 5 fields, "
                              f"found {len(fields)}")
        try:
            n = int(fields[0])
            value = complex(float(fields[3]), float(fields[4]))
        except ValueError:
            raise SchemaError(f"line {lineno}: cannot parse spectra row")
        out.setdefault(n, []).append(value)
    return {n: np.asarray(vals, dtype=np.complex128)
            for n, vals in out.items()}


# --- analysis reports ---------------------------------------------------


@dataclass
class ReportBundle:
    """Everything cmd_analyze derives from one records file."""

    experiment_id: str
    master_seed: int
    config_hash: str
    config_echo: str
    deviations: list            # DeviationRow over all n
    normality: list             # NormalityRow (possibly empty)
    sweep: SweepTable
    notes: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def verify_manifest(self, out_dir: str):
        """(filename, recorded, actual) for every mismatching entry."""
        bad = []
        for name, recorded in sorted(self.manifest.items()):
            target = os.path.join(out_dir, name)
            actual = sha256_of(target) if os.path.exists(target) else "missing"
            if actual != recorded:
                bad.append((name, recorded, actual))
        return bad


def _law_compliance_notes(cfg: ExperimentConfig):
    notes = []
    law = cfg.law
    missing = []
    if not law.zero_square_mean:
        missing.append("vanishing square mean")
    if not law.bounded_moment_growth:
        missing.append("factorial moment growth")
    if not law.bounded_density:
        missing.append("bounded density on the plane")
    if missing:
        notes.append(
            f"non-compliant control run: entry law '{law.name}' lacks "
            + " and ".join(missing)
            + "; the limit-covariance comparisons are exploratory only")
    return notes


def build_report(cfg: ExperimentConfig, records) -> ReportBundle:
    """Estimate, compare to theory, and profile normality; no resampling."""
    cfg_hash = config_hash(cfg)
    deviations = []
    normality = []
    notes = _law_compliance_notes(cfg)
    for n in cfg.n_values:
        ok = [rec for rec in records if rec.n == n and not rec.failed]
        if len(ok) < 2:
            notes.append(f"n={n}: fewer than 2 usable replicates, "
                         "no estimates")
            continue
        samples, labels, kinds = stack_records(cfg, records, n)
        report = estimate_moments(samples, labels, kinds, n)
        deviations.extend(compare_to_theory(report, cfg))
        defect = report.psd_defect()
        if defect < -1e-12:
            notes.append(f"n={n}: covariance estimate not PSD "
                         f"(defect {defect:.3e})")
        if len(ok) >= 500 and not normality:
            stat_cols = [i for i, k in enumerate(kinds) if k == "statistic"]
            normality = normality_diagnostics(
                samples[:, stat_cols], [labels[i] for i in stat_cols])
    if not normality:
        notes.append("normality diagnostics skipped "
                     "(need 500 replicates at one n)")
    sweep = convergence_sweep(cfg, records)
    return ReportBundle(cfg_hash[:12], cfg.master_seed, cfg_hash,
                        serialize_config(cfg, include_outputs=False),
                        deviations, normality, sweep, notes)


def _fmt_complex_cols(value: complex):
    value = complex(value)
    return [g17(value.real), g17(value.imag)]


def write_report(bundle: ReportBundle, out_dir: str):
    """Write the four report tables plus a manifest of their hashes."""
    os.makedirs(out_dir, exist_ok=True)

    def head(kind):
        return _header(kind, bundle.master_seed, bundle.config_hash)

    lines = head("deviations")
    lines.append("# schema: n\tquantity\tkind\ttheory_re\ttheory_im"
                 "\testimate_re\testimate_im\tdeviation\tse\tzscore\tflag")
    for row in bundle.deviations:
        fields = ([str(row.n), row.quantity, row.kind]
                  + _fmt_complex_cols(row.theory)
                  + _fmt_complex_cols(row.estimate)
                  + [g17(row.deviation), g17(row.se), g17(row.zscore),
                     row.flag])
        lines.append("\t".join(fields))
    _write_lines(os.path.join(out_dir, DEVIATIONS_NAME), lines)

    lines = head("normality")
    lines.append("# schema: label\tcomponent\tskewness\tskew_se"
                 "\texcess_kurtosis\tkurt_se\tcdf_distance\tflag")
    for row in bundle.normality:
        lines.append("\t".join([
            row.label, row.component, g17(row.skewness), g17(row.skew_se),
            g17(row.excess_kurtosis), g17(row.kurt_se),
            g17(row.cdf_distance), row.flag]))
    _write_lines(os.path.join(out_dir, NORMALITY_NAME), lines)

    lines = head("sweep")
    lines.append("# schema: n\treplicates_ok\tfailed\tmean_esd_ks"
                 "\tmean_spectral_norm\tmean_spectral_radius"
                 "\tomega_fraction\tmax_cov_zscore")
    for row in bundle.sweep.rows:
        lines.append("\t".join([
            str(row.n), str(row.replicates_ok), str(row.failed),
            g17(row.mean_esd_ks), g17(row.mean_spectral_norm),
            g17(row.mean_spectral_radius), g17(row.omega_fraction),
            g17(row.max_cov_zscore)]))
    for trend in bundle.sweep.trend_lines:
        lines.append(f"# trend: {trend}")
    _write_lines(os.path.join(out_dir, SWEEP_NAME), lines)

    _write_lines(os.path.join(out_dir, SUMMARY_NAME),
                 _summary_lines(bundle))

    names = [DEVIATIONS_NAME, NORMALITY_NAME, SWEEP_NAME, SUMMARY_NAME]
    bundle.manifest = {name: sha256_of(os.path.join(out_dir, name))
                       for name in names}
    lines = head("manifest")
    lines.append("# schema: sha256\tfilename")
    for name in names:
        lines.append(f"{bundle.manifest[name]}\t{name}")
    _write_lines(os.path.join(out_dir, MANIFEST_NAME), lines)
    return [os.path.join(out_dir, name) for name in names + [MANIFEST_NAME]]


def _summary_lines(bundle: ReportBundle):
    lines = _header("summary", bundle.master_seed, bundle.config_hash)
    lines.append(f"experiment {bundle.experiment_id}")
    lines.append("")
    lines.append("configuration:")
    for line in bundle.config_echo.splitlines():
        lines.append(f"  {line}")
    lines.append("")
    lines.append("replicates:")
    for row in bundle.sweep.rows:
        lines.append(f"  n={row.n}: ok={row.replicates_ok} "
                     f"failed={row.failed} mean_esd_ks="
                     f"{row.mean_esd_ks:.4f} mean_norm="
                     f"{row.mean_spectral_norm:.4f} mean_radius="
                     f"{row.mean_spectral_radius:.4f} in_omega="
                     f"{row.omega_fraction:.3f}")
    lines.append("")
    checked = [row for row in bundle.deviations
               if "exploratory" not in row.flag]
    exploratory = [row for row in bundle.deviations
                   if "exploratory" in row.flag]
    flagged = [row for row in checked if "z>4" in row.flag]
    lines.append(f"theory comparison: {len(checked)} checked rows, "
                 f"{len(exploratory)} exploratory rows, "
                 f"{len(flagged)} flagged (z>4)")
    worst = max((row.zscore for row in checked
                 if math.isfinite(row.zscore)), default=0.0)
    lines.append(f"  worst checked |z-score| = {worst:.3f}")
    for row in flagged:
        lines.append(f"  flagged: n={row.n} {row.quantity} "
                     f"deviation={row.deviation:.4g} se={row.se:.4g}")
    lines.append("")
    if bundle.normality:
        bad = [row for row in bundle.normality if row.flag != "-"]
        lines.append(f"normality: {len(bundle.normality)} coordinate "
                     f"components, {len(bad)} flagged")
        for row in bad:
            lines.append(f"  flagged: {row.label}.{row.component} "
                         f"({row.flag})")
    for trend in bundle.sweep.trend_lines:
        lines.append(f"trend: {trend}")
    for note in bundle.notes:
        lines.append(f"note: {note}")
    return lines


def read_manifest(path: str):
    """{filename: sha256} from a manifest file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise SchemaError(f"cannot read manifest: {exc}")
    out = {}
    for lineno, line in enumerate(raw, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise SchemaError(f"line {lineno}: expected 2 fields")
        out[fields[1]] = fields[0]
    return out
