"""Command-line pipeline: scale tables, dissonance curves, MIDI analysis, model fits.

Subcommands
-----------
scales   : scale tables and power-law fits for all three tunings
curves   : normalized dissonance curves over a register, with decay fits
analyze  : per-track transition statistics of a Standard MIDI File
model    : constrained relative-entropy model solved from an analysis directory
compare  : exponential-fit comparison of two cumulative-curve CSV files

Every JSON output carries ``schema_version``; CSVs carry header rows.
Outputs are byte-identical across re-runs for identical inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import consonance, ingest, maxent, stats, svg
from .scales import (
    PIANO_88,
    Register,
    ScaleKind,
    build_scale_table,
    fit_power_law,
)

SCHEMA_VERSION = 1

__all__ = ["main", "RunConfig"]


@dataclass
class RunConfig:
    command: str
    out_dir: Path
    formats: tuple[str, ...]
    max_semitones: int = 36
    scale: str = "all"
    partials: int = 7
    amplitudes: tuple[float, ...] | None = None
    register: Register = PIANO_88
    inputs: tuple[Path, ...] = ()
    track: str = "all"
    bridge_rests: bool = False
    tolerance: float = 0.01
    seed: int | None = None
    disaggregation: str = "random"
    analysis_dir: Path | None = None
    empirical_csv: Path | None = None
    model_csv: Path | None = None

    def __post_init__(self) -> None:
        if not 0 < self.tolerance <= 0.5:
            raise ValueError("tolerance must be in (0, 0.5]")
        if self.command == "model" and self.disaggregation == "random" and self.seed is None:
            raise ValueError(
                "random disaggregation requires --seed (or the MELMAX_SEED variable)"
            )

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _write_json(path: Path, payload: dict) -> Path:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    return _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return _write_text(path, buf.getvalue())


def _expfit_dict(fit: stats.ExpFit) -> dict:
    return {"amplitude": fit.amplitude, "scale": fit.scale, "r_squared": fit.r_squared}


# ---------------------------------------------------------------- scales


def cmd_scales(config: RunConfig) -> list[Path]:
    if config.scale == "all":
        kinds = list(ScaleKind)
    else:
        try:
            kinds = [ScaleKind(config.scale)]
        except ValueError:
            names = ", ".join(k.value for k in ScaleKind)
            raise ValueError(
                f"unknown scale {config.scale!r}; expected one of: {names}, all"
            ) from None
    written = []
    fits = {}
    for kind in kinds:
        table = build_scale_table(kind, config.max_semitones)
        if config.wants("csv"):
            rows = [[e.interval, str(e.ratio), repr(e.coefficient)] for e in table.entries]
            written.append(
                _write_csv(
                    config.out_dir / f"scale_{kind.value}.csv",
                    ["L", "ratio", "coefficient"],
                    rows,
                )
            )
        fit = fit_power_law(table)
        fits[kind.value] = {
            "a": fit.a,
            "b": fit.b,
            "a_err": fit.a_err,
            "b_err": fit.b_err,
            "r_squared": fit.r_squared,
        }
    if config.wants("json"):
        written.append(
            _write_json(
                config.out_dir / "scale_fits.json",
                {"max_semitones": config.max_semitones, "fits": fits},
            )
        )
    return written


# ---------------------------------------------------------------- curves


def _config_timbre(config: RunConfig) -> consonance.Timbre:
    if config.amplitudes is not None:
        return consonance.Timbre(
            tuple((float(k + 1), amp) for k, amp in enumerate(config.amplitudes))
        )
    return consonance.Timbre.harmonic(config.partials)


def cmd_curves(config: RunConfig) -> list[Path]:
    timbre = _config_timbre(config)
    written = []
    fit_report: dict[str, dict] = {}
    for axis, stem in (
        (consonance.CurveAxis.FREQUENCY_DIFFERENCE, "curves_freq_diff"),
        (consonance.CurveAxis.SQUARED_FREQUENCY_DIFFERENCE, "curves_sq_freq_diff"),
    ):
        curves = [
            consonance.dissonance_curve(L, config.register, timbre, axis)
            for L in range(1, 13)
        ]
        curves = consonance.normalize_curves(curves)
        if config.wants("csv"):
            rows = []
            for curve in curves:
                for x, y in zip(curve.x, curve.dissonance):
                    rows.append([curve.interval_size, repr(float(x)), repr(float(y))])
            written.append(
                _write_csv(config.out_dir / f"{stem}.csv", ["L", "x", "dissonance"], rows)
            )
        axis_fits = {}
        for curve in curves:
            fit = consonance.fit_second_order_exp(curve)
            axis_fits[str(curve.interval_size)] = {
                "y0": fit.y0,
                "a1": fit.a1,
                "t1": fit.t1,
                "a2": fit.a2,
                "t2": fit.t2,
                "r_squared": fit.r_squared,
            }
        fit_report[stem] = axis_fits
        if config.wants("svg"):
            series = [
                (f"L={c.interval_size}", c.x, c.dissonance) for c in curves
            ]
            written.append(
                _write_text(
                    config.out_dir / f"{stem}.svg",
                    svg.polyline_plot(
                        series,
                        title="Normalized dissonance across the register",
                        x_label=(
                            "frequency difference (Hz)"
                            if axis is consonance.CurveAxis.FREQUENCY_DIFFERENCE
                            else "squared-frequency difference (Hz^2)"
                        ),
                        y_label="dissonance (normalized)",
                    ),
                )
            )
    if config.wants("json"):
        written.append(_write_json(config.out_dir / "curve_fits.json", {"fits": fit_report}))
    return written


# ---------------------------------------------------------------- analyze


def _select_tracks(tracks: list[ingest.MidiTrack], selector: str) -> list[ingest.MidiTrack]:
    nonempty = [t for t in tracks if t.events]
    if selector == "all":
        return nonempty
    if selector.isdigit():
        wanted = [t for t in nonempty if t.index == int(selector)]
    else:
        wanted = [t for t in nonempty if t.name == selector]
    if not wanted:
        raise ValueError(f"no non-empty track matches selector {selector!r}")
    return wanted


def _branch_fits(hist: stats.BranchHistogram) -> dict:
    out = {}
    for name, branch in (("descending", hist.descending), ("ascending", hist.ascending)):
        pts = [(abs(b.eps_rep), b.p) for b in branch if b.p > 0]
        xs = np.array([x for x, _ in pts])
        ys = np.array([y for _, y in pts])
        out[name] = _expfit_dict(stats.fit_exponential(xs, ys))
    return out


def _cumulative_fits(curves: stats.CumulativeCurves) -> dict:
    out = {}
    for name, xs, ys in (
        ("ascending", curves.asc_x, curves.asc_y),
        ("descending", curves.desc_x, curves.desc_y),
    ):
        keep = ys > 0
        out[name] = _expfit_dict(stats.fit_exponential(np.abs(xs[keep]), ys[keep]))
    return out


def _cumulative_rows(curves: stats.CumulativeCurves) -> list[list]:
    rows = [["descending", repr(float(x)), repr(float(y))]
            for x, y in zip(curves.desc_x, curves.desc_y)]
    rows += [["ascending", repr(float(x)), repr(float(y))]
             for x, y in zip(curves.asc_x, curves.asc_y)]
    return rows


def _analyze_track(
    config: RunConfig, path: Path, track: ingest.MidiTrack
) -> list[Path]:
    label = f"{path.stem}_track{track.index}"
    line = ingest.extract_melodic_line(track.events, label=label)
    trans = ingest.transitions(line, bridge_rests=config.bridge_rests)
    if not trans:
        raise ValueError(f"track {track.index} of {path} has no transitions")
    register = line.register
    hist = stats.branch_histograms(trans, register=register)
    curves = stats.ccdf_cdf(trans)
    degeneracy = stats.bin_degeneracy(register, hist)
    obs = stats.observables(hist, line)
    # KL of the unison-normalised distributions against the register baseline
    kl = stats.kl_divergence(
        hist.probabilities() / (1.0 + hist.p_unison),
        degeneracy.q / (1.0 + degeneracy.q_unison),
    )

    out = config.out_dir
    written = []
    if config.wants("csv"):
        written.append(
            _write_csv(
                out / f"{label}_transitions.csv",
                ["index", "f_from", "f_to", "eps", "kind"],
                [
                    [n, repr(t.f_from), repr(t.f_to), repr(t.eps), t.kind.value]
                    for n, t in enumerate(trans)
                ],
            )
        )
        written.append(
            _write_csv(
                out / f"{label}_histogram.csv",
                ["k", "lower", "upper", "eps_rep", "count", "p"],
                [
                    [b.k, repr(b.lower), repr(b.upper), repr(b.eps_rep), b.count, repr(b.p)]
                    for b in hist.bins
                ],
            )
        )
        written.append(
            _write_csv(out / f"{label}_ccdf_cdf.csv", ["branch", "x", "y"],
                       _cumulative_rows(curves))
        )
        written.append(
            _write_csv(
                out / f"{label}_degeneracy.csv",
                ["k", "q"],
                [[b.k, repr(float(q))] for b, q in zip(hist.bins, degeneracy.q)],
            )
        )
        written.append(
            _write_csv(
                out / f"{label}_overlay.csv",
                ["k", "eps_rep", "p", "q"],
                [
                    [b.k, repr(b.eps_rep), repr(b.p), repr(float(q))]
                    for b, q in zip(hist.bins, degeneracy.q)
                ],
            )
        )
    if config.wants("json"):
        written.append(
            _write_json(
                out / f"{label}_fits.json",
                {"histogram": _branch_fits(hist), "cumulative": _cumulative_fits(curves)},
            )
        )
        written.append(
            _write_json(
                out / f"{label}_observables.json",
                {
                    "label": label,
                    "register": {
                        "lowest_index": register.lowest_index,
                        "highest_index": register.highest_index,
                    },
                    "n_transitions": hist.n_transitions,
                    "n_unisons": hist.n_unisons,
                    "mass_desc": obs.mass_desc,
                    "mass_asc": obs.mass_asc,
                    "mean_abs_eps": obs.mean_abs_eps,
                    "mean_eps": obs.mean_eps,
                    "deltas": list(obs.deltas),
                    "mean_abs_delta_per_transition": obs.mean_abs_delta_per_transition,
                    "kl_divergence": kl,
                },
            )
        )
    return written


def cmd_analyze(config: RunConfig) -> list[Path]:
    written = []
    for path in sorted(config.inputs):
        try:
            tracks = ingest.parse_midi(path.read_bytes())
        except ingest.MidiError as exc:
            raise ingest.MidiError(f"{path}: {exc}") from exc
        for track in _select_tracks(tracks, config.track):
            written.extend(_analyze_track(config, path, track))
    return written


# ---------------------------------------------------------------- model


def _load_analysis(analysis_dir: Path, label: str):
    hist_rows = list(csv.DictReader((analysis_dir / f"{label}_histogram.csv").open()))
    deg_rows = list(csv.DictReader((analysis_dir / f"{label}_degeneracy.csv").open()))
    obs = json.loads((analysis_dir / f"{label}_observables.json").read_text())

    bins = tuple(
        stats.HistBin(
            k=int(r["k"]),
            lower=float(r["lower"]),
            upper=float(r["upper"]),
            eps_rep=float(r["eps_rep"]),
            count=int(r["count"]),
            p=float(r["p"]),
        )
        for r in hist_rows
    )
    width = bins[0].upper - bins[0].lower
    hist = stats.BranchHistogram(
        bin_width=width,
        bins=bins,
        n_transitions=int(obs["n_transitions"]),
        n_unisons=int(obs["n_unisons"]),
    )
    register = Register(
        obs["register"]["lowest_index"], obs["register"]["highest_index"]
    )
    q = np.array([float(r["q"]) for r in deg_rows])
    inputs = maxent.ModelInputs(
        q=q,
        eps_rep=hist.eps_reps(),
        mass_desc=float(obs["mass_desc"]),
        mass_asc=float(obs["mass_asc"]),
        target_abs=float(obs["mean_abs_eps"]),
        target_signed=float(obs["mean_eps"]),
    )
    return hist, register, inputs


def _model_one(config: RunConfig, label: str) -> list[Path]:
    hist, register, inputs = _load_analysis(config.analysis_dir, label)
    solution = maxent.solve_lagrange(inputs, tolerance=config.tolerance)
    mode = (
        maxent.DisaggregationMode.UNIFORM
        if config.disaggregation == "uniform"
        else maxent.DisaggregationMode.SEEDED_RANDOM
    )
    model = maxent.disaggregate(solution.p, inputs, register, mode, config.seed)

    empirical_curves = _read_cumulative(config.analysis_dir / f"{label}_ccdf_cdf.csv")
    report = maxent.compare(model.curves, empirical_curves)

    out = config.out_dir
    written = []
    if config.wants("json"):
        written.append(
            _write_json(
                out / f"{label}_model_report.json",
                {
                    "label": label,
                    "lambda1": solution.lambda1,
                    "lambda2": solution.lambda2,
                    "branch_masses": {
                        "descending": inputs.mass_desc,
                        "ascending": inputs.mass_asc,
                    },
                    "targets": {
                        "mean_abs_eps": inputs.target_abs,
                        "mean_eps": inputs.target_signed,
                    },
                    "achieved": {
                        "mean_abs_eps": solution.achieved_abs,
                        "mean_eps": solution.achieved_signed,
                    },
                    "iterations": solution.iterations,
                    "tolerance": config.tolerance,
                    "seed": config.seed,
                    "disaggregation": mode.value,
                    "per_bin": [
                        {
                            "k": b.k,
                            "eps_rep": b.eps_rep,
                            "q": float(q),
                            "p_model": float(pm),
                            "p_empirical": b.p,
                        }
                        for b, q, pm in zip(hist.bins, inputs.q, solution.p)
                    ],
                },
            )
        )
        written.append(
            _write_json(out / f"{label}_comparison.json", _comparison_dict(report))
        )
    if config.wants("csv"):
        written.append(
            _write_csv(
                out / f"{label}_model_histogram.csv",
                ["k", "lower", "upper", "eps_rep", "p"],
                [
                    [b.k, repr(b.lower), repr(b.upper), repr(b.eps_rep), repr(float(pm))]
                    for b, pm in zip(hist.bins, solution.p)
                ],
            )
        )
        written.append(
            _write_csv(
                out / f"{label}_model_ccdf_cdf.csv",
                ["branch", "x", "y"],
                _cumulative_rows(model.curves),
            )
        )
    if config.wants("svg"):
        reps = hist.eps_reps()
        written.append(
            _write_text(
                out / f"{label}_model_overlay.svg",
                svg.polyline_plot(
                    [
                        ("empirical", reps, hist.probabilities()),
                        ("model", reps, solution.p),
                    ],
                    title=f"Histogram vs model: {label}",
                    x_label="squared-frequency difference (Hz^2)",
                    y_label="bin probability",
                ),
            )
        )
    return written


def _comparison_dict(report: maxent.ComparisonReport) -> dict:
    def branch(cmp: maxent.BranchComparison) -> dict:
        return {
            "model": _expfit_dict(cmp.model),
            "empirical": _expfit_dict(cmp.empirical),
            "amplitude_rel_diff": cmp.amplitude_rel_diff,
            "scale_rel_diff": cmp.scale_rel_diff,
            "same_order": cmp.same_order,
        }

    return {"ascending": branch(report.ascending), "descending": branch(report.descending)}


def _read_cumulative(path: Path) -> stats.CumulativeCurves:
    asc_x, asc_y, desc_x, desc_y = [], [], [], []
    for row in csv.DictReader(path.open()):
        if row["branch"] == "ascending":
            asc_x.append(float(row["x"]))
            asc_y.append(float(row["y"]))
        else:
            desc_x.append(float(row["x"]))
            desc_y.append(float(row["y"]))
    return stats.CumulativeCurves(
        np.array(asc_x), np.array(asc_y), np.array(desc_x), np.array(desc_y)
    )


def cmd_model(config: RunConfig) -> list[Path]:
    labels = sorted(
        p.name.removesuffix("_histogram.csv")
        for p in config.analysis_dir.glob("*_histogram.csv")
    )
    if not labels:
        raise ValueError(f"no analysis outputs (*_histogram.csv) in {config.analysis_dir}")
    written = []
    for label in labels:
        written.extend(_model_one(config, label))
    return written


def cmd_compare(config: RunConfig) -> list[Path]:
    model_curves = _read_cumulative(config.model_csv)
    empirical_curves = _read_cumulative(config.empirical_csv)
    report = maxent.compare(model_curves, empirical_curves)
    return [_write_json(config.out_dir / "comparison.json", _comparison_dict(report))]


# ---------------------------------------------------------------- wiring


def _parse_register(text: str) -> Register:
    lo, _, hi = text.partition(":")
    return Register(int(lo), int(hi))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melmax",
        description="Tonal-consonance parameters and melodic transition models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument(
            "--format",
            default="csv,json",
            help="comma-separated output formats: csv,json,svg",
        )

    p_scales = sub.add_parser("scales", help="scale tables and power-law fits")
    p_scales.add_argument("--max-semitones", type=int, default=36)
    p_scales.add_argument("--scale", default="all",
                          help="just, pythagorean, tet, or all")
    common(p_scales)

    p_curves = sub.add_parser("curves", help="dissonance curves and decay fits")
    p_curves.add_argument("--partials", type=int, default=7)
    p_curves.add_argument("--amplitudes", default=None,
                          help="comma-separated partial amplitudes")
    p_curves.add_argument("--register", default="21:108", help="LO:HI pitch indices")
    common(p_curves)

    p_an = sub.add_parser("analyze", help="transition statistics of a MIDI file")
    p_an.add_argument("--input", type=Path, action="append", required=True)
    p_an.add_argument("--track", default="all", help="track index, track name, or 'all'")
    p_an.add_argument("--bridge-rests", action="store_true",
                      help="also count transitions across rests")
    common(p_an)

    p_model = sub.add_parser("model", help="solve the relative-entropy model")
    p_model.add_argument("--analysis", type=Path, required=True,
                         help="directory holding analyze outputs")
    p_model.add_argument("--tolerance", type=float, default=0.01)
    p_model.add_argument("--seed", type=int, default=None)
    p_model.add_argument("--disaggregate", choices=("uniform", "random"),
                         default="random")
    common(p_model)

    p_cmp = sub.add_parser("compare", help="compare two cumulative-curve CSVs")
    p_cmp.add_argument("--empirical", type=Path, required=True)
    p_cmp.add_argument("--model", type=Path, required=True)
    common(p_cmp)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    seed = getattr(args, "seed", None)
    if seed is None and os.environ.get("MELMAX_SEED"):
        seed = int(os.environ["MELMAX_SEED"])
    amplitudes = None
    if getattr(args, "amplitudes", None):
        amplitudes = tuple(float(v) for v in args.amplitudes.split(","))
    return RunConfig(
        command=args.command,
        out_dir=args.out,
        formats=tuple(args.format.split(",")),
        max_semitones=getattr(args, "max_semitones", 36),
        scale=getattr(args, "scale", "all"),
        partials=getattr(args, "partials", 7),
        amplitudes=amplitudes,
        register=_parse_register(getattr(args, "register", "21:108")),
        inputs=tuple(getattr(args, "input", None) or ()),
        track=getattr(args, "track", "all"),
        bridge_rests=getattr(args, "bridge_rests", False),
        tolerance=getattr(args, "tolerance", 0.01),
        seed=seed,
        disaggregation=getattr(args, "disaggregate", "random"),
        analysis_dir=getattr(args, "analysis", None),
        empirical_csv=getattr(args, "empirical", None),
        model_csv=getattr(args, "model", None),
    )


_COMMANDS = {
    "scales": cmd_scales,
    "curves": cmd_curves,
    "analyze": cmd_analyze,
    "model": cmd_model,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        written = _COMMANDS[args.command](config)
    except Exception as exc:  # structured failure report, nonzero exit
        error = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
