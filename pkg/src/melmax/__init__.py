"""melmax: tonal-consonance parameters and maximum-entropy models of melody.

The package links the microscopic physics of musical intervals (frequency
sums, differences, and sensory dissonance of complex tones) with the
macroscopic statistics of melodic lines (branch histograms of the signed
squared-frequency difference and their constrained relative-entropy
models).

Modules
-------
scales      : scale tables, pitch frequencies, power-law coefficient fits
consonance  : Sethares dissonance kernel and register-wide curves
ingest      : Standard MIDI File parsing and melodic-line extraction
stats       : branch histograms, cumulative curves, degeneracy baseline
maxent      : Lagrange-multiplier solver and model regeneration
cli         : the ``melmax`` command-line pipeline
"""

from .consonance import (
    SIX_HARMONICS,
    CurveAxis,
    DissonanceCurve,
    SecondOrderExpFit,
    Timbre,
    beat_frequency,
    complex_dissonance,
    dissonance_curve,
    fit_second_order_exp,
    normalize_curves,
    pair_dissonance,
)
from .ingest import (
    ChordPolicy,
    MelodicLine,
    MidiTrack,
    NoteEvent,
    Segment,
    Transition,
    TransitionKind,
    extract_melodic_line,
    parse_midi,
    transitions,
    write_midi,
)
from .maxent import (
    DisaggregationMode,
    ModelInputs,
    ModelSolution,
    compare,
    disaggregate,
    model_distribution,
    model_expectations,
    solve_lagrange,
)
from .scales import (
    PIANO_88,
    PowerLawFit,
    Register,
    ScaleKind,
    ScaleTable,
    build_scale_table,
    distinguishability_scan,
    epsilon,
    fit_power_law,
    interval_size,
    tet_frequency,
)
from .stats import (
    BranchHistogram,
    CumulativeCurves,
    Degeneracy,
    ExpFit,
    Observables,
    bin_decomposition,
    bin_degeneracy,
    branch_histograms,
    ccdf_cdf,
    energy_density_difference,
    fit_exponential,
    kl_divergence,
    observables,
    sturges_bin_count,
)

__version__ = "0.1.0"
