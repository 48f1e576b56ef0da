"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; every criterion also fails loudly through its assertions.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_track_events, random_walk_events
from melmax import consonance, ingest, maxent, stats
from melmax.consonance import SIX_HARMONICS
from melmax.ingest import NoteEvent, Transition
from melmax.scales import (
    PIANO_88,
    ScaleKind,
    build_scale_table,
    distinguishability_scan,
    epsilon,
    fit_power_law,
    tet_frequency,
)


class _Timer:
    def __init__(self, budget: float):
        self.budget = budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def _report(number: int, timer: _Timer, description: str) -> None:
    print(f"ACCEPTANCE {number} PASS ({timer.elapsed:.2f}s): {description}")
    assert timer.elapsed < timer.budget, (
        f"criterion {number} exceeded its {timer.budget}s budget: {timer.elapsed:.2f}s"
    )


def _analyzed_walk(seed=7, n_notes=1200, lo=48, hi=84):
    events = random_walk_events(seed=seed, n_notes=n_notes, lo=lo, hi=hi)
    line = ingest.extract_melodic_line(events, label="walk")
    trans = ingest.transitions(line)
    hist = stats.branch_histograms(trans, register=line.register)
    deg = stats.bin_degeneracy(line.register, hist)
    obs = stats.observables(hist, line)
    return line, trans, hist, deg, obs


def test_criterion_1_scale_power_law_fits():
    expected = {
        ScaleKind.TET: (34.456, 0.5, 0.979, 0.01),
        ScaleKind.PYTHAGOREAN: (30.801, 0.6, 0.918, 0.015),
        ScaleKind.JUST: (31.176, 0.6, 0.925, 0.015),
    }
    with _Timer(1.0) as timer:
        for kind, (a, a_tol, b, b_tol) in expected.items():
            fit = fit_power_law(build_scale_table(kind, 36))
            assert abs(fit.a - a) <= a_tol, f"{kind}: a={fit.a}"
            assert abs(fit.b - b) <= b_tol, f"{kind}: b={fit.b}"
            assert fit.r_squared >= 0.998, f"{kind}: R2={fit.r_squared}"
    _report(1, timer, "power-law fits match published (a, b) with R2 >= 0.998")


def test_criterion_2_dissonance_curves():
    with _Timer(10.0) as timer:
        curves = [
            consonance.dissonance_curve(L, PIANO_88, SIX_HARMONICS)
            for L in range(1, 13)
        ]
        normalized = consonance.normalize_curves(curves)
        for curve in normalized:
            fit = consonance.fit_second_order_exp(curve)
            assert fit.r_squared >= 0.98, (
                f"L={curve.interval_size}: R2={fit.r_squared}"
            )
            assert curve.dissonance[0] > curve.dissonance[40], (
                f"L={curve.interval_size}: bottom not rougher than middle"
            )
    _report(2, timer, "all 12 normalized curves fit double-exponential decay at R2 >= 0.98")


def test_criterion_3_distinguishability():
    with _Timer(1.0) as timer:
        groups = distinguishability_scan(PIANO_88)
        collisions = {
            eps: pairs for eps, pairs in groups.items()
            if eps != 0 and len(pairs) > 1
        }
        assert collisions == {}, f"nonzero eps collisions: {collisions}"
        assert len(groups[0.0]) == 88
    _report(3, timer, "88-key register: every nonzero eps value is unique")


def test_criterion_4_degeneracy_baseline():
    with _Timer(1.0) as timer:
        line, trans, hist, deg, obs = _analyzed_walk()  # 3-octave ambitus
        assert line.register.highest_index - line.register.lowest_index >= 36
        n_half = hist.n_half
        reps = np.abs(hist.eps_reps()[n_half:])
        q = deg.q[n_half:]
        keep = q > 0
        from melmax.scales import ScaleEntry, ScaleTable

        table = ScaleTable(
            ScaleKind.TET,
            tuple(ScaleEntry(k + 1, 1.5, float(v)) for k, v in enumerate(q[keep])),
        )
        r2_pow = fit_power_law(table).r_squared
        r2_exp = stats.fit_exponential(reps[keep], q[keep]).r_squared
        assert r2_pow > r2_exp, f"power {r2_pow} vs exp {r2_exp}"
        assert q[0] >= q[-1]
    _report(4, timer, "degeneracy baseline prefers a power law over an exponential")


def test_criterion_5_solver_round_trip():
    with _Timer(30.0) as timer:
        _, _, hist, deg, obs = _analyzed_walk()
        rng = np.random.default_rng(1234)
        base = maxent.ModelInputs.from_analysis(hist, deg, obs)
        n_half = base.n_half
        for trial in range(100):
            lambda1 = 10.0 ** rng.uniform(-7.0, -4.0)
            lambda2 = rng.uniform(-1.0e-5, 1.0e-5)
            p_planted = maxent.model_distribution(base, lambda1, lambda2)
            abs_t, signed_t = maxent.model_expectations(p_planted, base.eps_rep)
            inputs = maxent.ModelInputs(
                base.q, base.eps_rep, base.mass_desc, base.mass_asc, abs_t, signed_t
            )
            sol = maxent.solve_lagrange(inputs, tolerance=1e-6)
            assert abs(sol.lambda1 - lambda1) <= 0.01 * abs(lambda1), f"trial {trial}"
            assert abs(sol.lambda2 - lambda2) <= 0.01 * abs(lambda2), f"trial {trial}"
            assert sol.p[:n_half].sum() == pytest.approx(base.mass_desc, rel=1e-12)
            assert sol.p[n_half:].sum() == pytest.approx(base.mass_asc, rel=1e-12)
    _report(5, timer, "100 planted multiplier pairs recovered within 1%")


def test_criterion_6_monte_carlo_round_trip():
    with _Timer(60.0) as timer:
        line, trans, hist, deg, obs = _analyzed_walk(seed=11, n_notes=800, lo=55, hi=79)
        assert abs(obs.mean_eps) <= obs.mean_abs_eps
        inputs = maxent.ModelInputs.from_analysis(hist, deg, obs)
        sol = maxent.solve_lagrange(inputs)
        model = maxent.disaggregate(
            sol.p, inputs, line.register, maxent.DisaggregationMode.SEEDED_RANDOM, seed=5
        )
        probs = np.array([row[3] for row in model.transitions])
        freqs_from = np.array([tet_frequency(row[0]) for row in model.transitions])
        freqs_to = np.array([tet_frequency(row[1]) for row in model.transitions])
        rng = np.random.default_rng(999)
        picks = rng.choice(len(probs), size=100_000, p=probs / probs.sum())
        sampled = [Transition(freqs_from[k], freqs_to[k]) for k in picks]

        sampled_hist = stats.branch_histograms(sampled)
        abs_e, signed_e = maxent.model_expectations(
            sampled_hist.probabilities(), sampled_hist.eps_reps()
        )
        assert abs(signed_e) <= abs_e
        abs_m, signed_m = maxent.model_expectations(sol.p, inputs.eps_rep)
        assert abs(signed_m) <= abs_m

        report = maxent.compare(model.curves, stats.ccdf_cdf(sampled))
        assert report.ascending.scale_rel_diff <= 0.10, (
            f"ascending G off by {report.ascending.scale_rel_diff:.3f}"
        )
        assert report.descending.scale_rel_diff <= 0.10, (
            f"descending G off by {report.descending.scale_rel_diff:.3f}"
        )
    _report(6, timer, "100k sampled transitions reproduce both decay scales within 10%")


def test_criterion_7_invariant_suite():
    with _Timer(30.0) as timer:
        rng = np.random.default_rng(77)

        # probability mass identity, exactly, on rational count arithmetic
        for seed in range(5):
            events = random_walk_events(seed=seed, n_notes=300)
            line = ingest.extract_melodic_line(events)
            trans = ingest.transitions(line)
            hist = stats.branch_histograms(trans)
            total = sum(Fraction(b.count, hist.n_transitions) for b in hist.bins)
            assert total == 1 + Fraction(hist.n_unisons, hist.n_transitions)

        # KL nonnegativity with equality iff p == q
        for _ in range(1000):
            p = rng.dirichlet(np.ones(12))
            if rng.random() < 0.5:
                q = p.copy()
                assert stats.kl_divergence(p, q) == 0.0
            else:
                q = rng.dirichlet(np.ones(12))
                assert stats.kl_divergence(p, q) > 0.0

        # eps antisymmetry, exact in floating point
        for _ in range(500):
            f1, f2 = rng.uniform(20.0, 5000.0, size=2)
            assert epsilon(f1, f2) == -epsilon(f2, f1)

        # segment drift telescoping and its ambitus bound
        for _ in range(200):
            pitches = rng.integers(30, 100, size=rng.integers(2, 40))
            freqs = [tet_frequency(int(i)) for i in pitches]
            steps = [epsilon(a, b) for a, b in zip(freqs, freqs[1:])]
            delta = freqs[-1] ** 2 - freqs[0] ** 2
            assert sum(steps) == pytest.approx(delta, rel=1e-9, abs=1e-6)
            f_sq = [f**2 for f in freqs]
            drift_per_transition = abs(sum(steps)) / len(steps)
            bound = (max(f_sq) - min(f_sq)) / len(steps)
            assert drift_per_transition <= bound * (1 + 1e-12)
    _report(7, timer, "mass, KL, antisymmetry, and drift invariants all hold")


def test_criterion_8_midi_round_trip():
    with _Timer(30.0) as timer:
        rng = np.random.default_rng(2025)
        for _ in range(50):
            n_tracks = int(rng.integers(1, 4))
            tracks = [(f"t{k}", random_track_events(rng, k)) for k in range(n_tracks)]
            parsed = ingest.parse_midi(ingest.write_midi(tracks))
            reparsed = ingest.parse_midi(
                ingest.write_midi([(t.name, list(t.events)) for t in parsed])
            )
            assert [t.events for t in parsed] == [t.events for t in reparsed]

        # chord collapse: highest pitch wins at every simultaneous onset
        for _ in range(20):
            onset = 0
            events = []
            expected = []
            for _ in range(int(rng.integers(2, 12))):
                notes = rng.choice(np.arange(40, 90), size=rng.integers(1, 5),
                                   replace=False)
                for n in notes:
                    events.append(NoteEvent(0, onset, 120, int(n), 64))
                expected.append(int(notes.max()))
                onset += 120
            line = ingest.extract_melodic_line(events)
            got = [p for seg in line.segments for p, _ in seg.pitches]
            assert got == expected
    _report(8, timer, "50 MIDI files round-trip; chords collapse to the highest pitch")
