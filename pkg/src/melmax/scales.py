"""Musical-scale frequency tables and the pair-of-pitches parameter algebra.

A pair of pitches (f_i, f_j) in a scale is characterised by two physical
quantities: the frequency difference f_j - f_i and the frequency sum
f_j + f_i.  Their ratio depends only on the interval size L (in semitones),

    f_j + f_i = coefficient(L) * (f_j - f_i),

with coefficient(L) = (n + m)/(n - m) for a rational scale ratio n/m and
(2**(L/12) + 1)/(2**(L/12) - 1) for the equal-tempered scale.  Over
L = 1..36 the coefficient closely follows a power law a * L**(-b), which
this module fits.

The product of sum and difference, epsilon = f_j**2 - f_i**2, packs both
parameters into a single signed quantity that is unique per ordered pitch
pair in the equal-tempered register (see ``distinguishability_scan``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

__all__ = [
    "ScaleKind",
    "ScaleEntry",
    "ScaleTable",
    "PowerLawFit",
    "Register",
    "PIANO_88",
    "tet_frequency",
    "build_scale_table",
    "fit_power_law",
    "epsilon",
    "interval_size",
    "distinguishability_scan",
]

MAX_TABLE_SEMITONES = 36


class ScaleKind(Enum):
    JUST = "just"
    PYTHAGOREAN = "pythagorean"
    TET = "tet"


# Base-octave frequency ratios, degree 0..12.  Just intonation uses the
# classic five-limit chromatic table; the Pythagorean table is the
# three-limit chromatic scale with sharps built from stacked fifths
# (C#, F#, G#) and flats from stacked fourths (Eb, Bb).
_JUST_BASE = (
    Fraction(1),
    Fraction(16, 15),
    Fraction(9, 8),
    Fraction(6, 5),
    Fraction(5, 4),
    Fraction(4, 3),
    Fraction(45, 32),
    Fraction(3, 2),
    Fraction(8, 5),
    Fraction(5, 3),
    Fraction(16, 9),
    Fraction(15, 8),
    Fraction(2),
)

_PYTHAGOREAN_BASE = (
    Fraction(1),
    Fraction(2187, 2048),
    Fraction(9, 8),
    Fraction(32, 27),
    Fraction(81, 64),
    Fraction(4, 3),
    Fraction(729, 512),
    Fraction(3, 2),
    Fraction(6561, 4096),
    Fraction(27, 16),
    Fraction(16, 9),
    Fraction(243, 128),
    Fraction(2),
)


@dataclass(frozen=True)
class ScaleEntry:
    """One interval size with its frequency ratio and sum/difference coefficient."""

    interval: int
    ratio: Fraction | float
    coefficient: float


@dataclass(frozen=True)
class ScaleTable:
    kind: ScaleKind
    entries: tuple[ScaleEntry, ...]

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Interval sizes and coefficients as float arrays."""
        sizes = np.array([e.interval for e in self.entries], dtype=float)
        coeffs = np.array([e.coefficient for e in self.entries], dtype=float)
        return sizes, coeffs


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of y = a * x**(-b) with standard errors."""

    a: float
    b: float
    a_err: float
    b_err: float
    r_squared: float


@dataclass(frozen=True)
class Register:
    """A contiguous span of pitch indices under a fixed tuning.

    Indices follow the MIDI convention; ``reference_frequency`` is the
    frequency of index 69 (concert A).
    """

    lowest_index: int
    highest_index: int
    reference_frequency: float = 440.0
    tuning: ScaleKind = ScaleKind.TET

    def __post_init__(self) -> None:
        if self.lowest_index > self.highest_index:
            raise ValueError(
                f"register bounds reversed: {self.lowest_index} > {self.highest_index}"
            )
        if self.reference_frequency <= 0:
            raise ValueError("reference_frequency must be positive")

    @property
    def indices(self) -> range:
        return range(self.lowest_index, self.highest_index + 1)

    @property
    def size(self) -> int:
        return self.highest_index - self.lowest_index + 1


#: The 88-key piano register, A0 (index 21) to C8 (index 108).
PIANO_88 = Register(21, 108)


def tet_frequency(note_index: int, register: Register = PIANO_88) -> float:
    """Equal-tempered frequency of a pitch index.

    The register supplies the reference frequency (index 69); the index
    itself may lie outside the register bounds.
    """
    if register.tuning is not ScaleKind.TET:
        raise ValueError("tet_frequency requires an equal-tempered register")
    return register.reference_frequency * 2.0 ** ((note_index - 69) / 12.0)


def build_scale_table(kind: ScaleKind, max_semitones: int = MAX_TABLE_SEMITONES) -> ScaleTable:
    """Table of ratios and sum/difference coefficients for L = 1..max_semitones.

    Ratios beyond the octave are the base-octave ratio raised by the
    appropriate number of octave doublings.
    """
    if not 1 <= max_semitones <= MAX_TABLE_SEMITONES:
        raise ValueError(f"max_semitones must be in [1, {MAX_TABLE_SEMITONES}]")
    entries = []
    for L in range(1, max_semitones + 1):
        if kind is ScaleKind.TET:
            ratio: Fraction | float = 2.0 ** (L / 12.0)
            coeff = (ratio + 1.0) / (ratio - 1.0)
        else:
            base = _JUST_BASE if kind is ScaleKind.JUST else _PYTHAGOREAN_BASE
            octaves, degree = divmod(L, 12)
            ratio = base[degree] * 2**octaves
            n, m = ratio.numerator, ratio.denominator
            coeff = (n + m) / (n - m)
        entries.append(ScaleEntry(L, ratio, coeff))
    return ScaleTable(kind, tuple(entries))


def _power_law_r2(x: np.ndarray, y: np.ndarray, a: float, b: float) -> float:
    resid = y - a * x ** (-b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / ss_tot


def fit_power_law(table: ScaleTable) -> PowerLawFit:
    """Fit coefficient(L) = a * L**(-b) by least squares on the original scale.

    A log-log ordinary-least-squares solution seeds a damped Gauss-Newton
    iteration on the untransformed residuals; parameter standard errors
    come from the Jacobian at the optimum.
    """
    x, y = table.coefficients()
    if len(x) < 3:
        raise ValueError("power-law fit needs at least 3 table entries")
    if np.all(x == x[0]):
        raise ValueError("degenerate table: all interval sizes equal")

    coef, *_ = np.linalg.lstsq(
        np.column_stack([np.ones_like(x), np.log(x)]), np.log(y), rcond=None
    )
    a, b = float(np.exp(coef[0])), float(-coef[1])

    sse = float(np.sum((y - a * x ** (-b)) ** 2))
    damping = 1.0
    for _ in range(100):
        model = a * x ** (-b)
        jac = np.column_stack([x ** (-b), -a * np.log(x) * x ** (-b)])
        step, *_ = np.linalg.lstsq(jac, y - model, rcond=None)
        a_new, b_new = a + damping * step[0], b + damping * step[1]
        sse_new = float(np.sum((y - a_new * x ** (-b_new)) ** 2))
        if sse_new > sse:
            damping *= 0.5
            continue
        converged = sse - sse_new <= 1e-14 * sse
        a, b, sse = a_new, b_new, sse_new
        if converged:
            break

    jac = np.column_stack([x ** (-b), -a * np.log(x) * x ** (-b)])
    dof = max(len(x) - 2, 1)
    cov = np.linalg.inv(jac.T @ jac) * sse / dof
    return PowerLawFit(
        a=a,
        b=b,
        a_err=float(np.sqrt(cov[0, 0])),
        b_err=float(np.sqrt(cov[1, 1])),
        r_squared=_power_law_r2(x, y, a, b),
    )


def epsilon(f_i: float, f_j: float) -> float:
    """Signed squared-frequency difference f_j**2 - f_i**2 of a pitch pair.

    Equals (f_j + f_i) * (f_j - f_i), so it carries both the consonance
    parameter |f_j - f_i| and the register location of the pair.
    """
    if f_i <= 0 or f_j <= 0:
        raise ValueError("frequencies must be positive")
    return f_j * f_j - f_i * f_i


def interval_size(f_i: float, f_j: float) -> int:
    """Signed interval size in semitones, rounded to the nearest integer."""
    if f_i <= 0 or f_j <= 0:
        raise ValueError("frequencies must be positive")
    return round(12.0 * math.log2(f_j / f_i))


def distinguishability_scan(
    register: Register, rel_tolerance: float = 1e-9
) -> dict[float, list[tuple[int, int]]]:
    """Group all ordered pitch pairs of a register by their epsilon value.

    Returns a map from a representative epsilon to the ordered index pairs
    sharing that value within ``rel_tolerance``.  Unisons all share the
    degenerate value 0; any *nonzero* group with more than one pair means
    epsilon fails to distinguish those pairs in this register.
    """
    freqs = {i: tet_frequency(i, register) for i in register.indices}
    pairs = [
        (epsilon(freqs[i], freqs[j]), (i, j))
        for i in register.indices
        for j in register.indices
    ]
    pairs.sort(key=lambda item: item[0])

    groups: dict[float, list[tuple[int, int]]] = {}
    group_key: float | None = None
    prev_eps = 0.0
    for eps, pair in pairs:
        scale = max(abs(eps), abs(prev_eps))
        if group_key is None or abs(eps - prev_eps) > rel_tolerance * scale:
            group_key = eps
            groups[group_key] = []
        groups[group_key].append(pair)
        prev_eps = eps
    return groups
