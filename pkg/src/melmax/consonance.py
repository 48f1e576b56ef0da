"""Sensory dissonance of complex-tone pairs and dissonance curves over a register.

Two pure tones produce roughness when their frequency difference falls
inside the critical band; the Plomp-Levelt bump is modelled by the
Sethares kernel, a difference of two exponentials whose width scales
with the lower frequency.  A complex tone is a set of partials, and the
dissonance of two complex tones is the sum of the kernel over every
partial pair.

Sweeping a fixed interval size across a register yields a dissonance
curve: the same interval is rougher at the bottom of the register than
in the middle, and the curve as a function of the frequency difference
(or of the squared-frequency difference) is a smooth decay well fitted
by a second-order exponential.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import least_squares

from .scales import Register, tet_frequency

__all__ = [
    "Timbre",
    "CurveAxis",
    "DissonanceCurve",
    "SecondOrderExpFit",
    "FitConvergenceError",
    "beat_frequency",
    "pair_dissonance",
    "complex_dissonance",
    "dissonance_curve",
    "normalize_curves",
    "fit_second_order_exp",
]

# Sethares roughness kernel constants: amplitudes decay with rates B1, B2
# over a critical-band distance scaled by DSTAR / (S1 * f_min + S2).
_B1 = 3.5
_B2 = 5.75
_DSTAR = 0.24
_S1 = 0.021
_S2 = 19.0


class FitConvergenceError(RuntimeError):
    """Raised when a nonlinear fit fails to converge or is ill-posed."""


@dataclass(frozen=True)
class Timbre:
    """Partial structure of a complex tone.

    ``partials`` lists (multiple, amplitude) pairs; multiples are relative
    to the fundamental, strictly increasing, and start at 1.
    """

    partials: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.partials:
            raise ValueError("timbre needs at least one partial")
        mults = [m for m, _ in self.partials]
        if mults[0] != 1:
            raise ValueError("first partial multiple must be 1")
        if any(b <= a for a, b in zip(mults, mults[1:])):
            raise ValueError("partial multiples must be strictly increasing")
        if any(a < 0 for _, a in self.partials):
            raise ValueError("partial amplitudes must be nonnegative")

    @classmethod
    def harmonic(cls, n_partials: int, amplitude: float = 1.0) -> "Timbre":
        """Harmonic timbre: multiples 1..n_partials, equal amplitudes."""
        if n_partials < 1:
            raise ValueError("n_partials must be >= 1")
        return cls(tuple((float(k), amplitude) for k in range(1, n_partials + 1)))

    def multiples(self) -> np.ndarray:
        return np.array([m for m, _ in self.partials])

    def amplitudes(self) -> np.ndarray:
        return np.array([a for _, a in self.partials])


#: Harmonic timbre with a fundamental plus six harmonics of equal amplitude.
SIX_HARMONICS = Timbre.harmonic(7)


class CurveAxis(Enum):
    FREQUENCY_DIFFERENCE = "freq_diff"
    SQUARED_FREQUENCY_DIFFERENCE = "sq_freq_diff"


@dataclass(frozen=True)
class DissonanceCurve:
    """Dissonance of a fixed-size interval swept across a register.

    ``x`` holds the per-pair abscissa (frequency difference in Hz, or
    squared-frequency difference in Hz^2) in strictly increasing order.
    """

    interval_size: int
    axis: CurveAxis
    x: np.ndarray
    dissonance: np.ndarray


@dataclass(frozen=True)
class SecondOrderExpFit:
    """Fit of y = y0 + a1 * exp(-x/t1) + a2 * exp(-x/t2), with t1 <= t2."""

    y0: float
    a1: float
    t1: float
    a2: float
    t2: float
    r_squared: float


def beat_frequency(f_i: float, f_j: float) -> float:
    """Beat rate |f_j - f_i| of two superposed pure tones."""
    if f_i <= 0 or f_j <= 0:
        raise ValueError("frequencies must be positive")
    return abs(f_j - f_i)


def pair_dissonance(f1: float, a1: float, f2: float, a2: float) -> float:
    """Sethares roughness of a pure-tone pair.

    Zero at equal frequencies, rises to a single maximum near a quarter of
    the critical band, and decays to zero for wide separations.
    """
    f_min = f1 if f1 <= f2 else f2
    s = _DSTAR / (_S1 * f_min + _S2)
    d = abs(f2 - f1)
    return a1 * a2 * (np.exp(-_B1 * s * d) - np.exp(-_B2 * s * d))


def complex_dissonance(base: float, ratio: float, timbre: Timbre) -> float:
    """Total dissonance of two complex tones with fundamentals base and base*ratio.

    Sums the pair kernel over every unordered pair drawn from the combined
    partial set, so each tone's own partials contribute their intrinsic
    roughness alongside the cross terms.
    """
    if base <= 0:
        raise ValueError("base frequency must be positive")
    mults = timbre.multiples()
    amps = timbre.amplitudes()
    freqs = np.concatenate([base * mults, base * ratio * mults])
    amp = np.concatenate([amps, amps])

    ii, jj = np.triu_indices(len(freqs), k=1)
    f_lo = np.minimum(freqs[ii], freqs[jj])
    d = np.abs(freqs[jj] - freqs[ii])
    s = _DSTAR / (_S1 * f_lo + _S2)
    kernel = np.exp(-_B1 * s * d) - np.exp(-_B2 * s * d)
    return float(np.sum(amp[ii] * amp[jj] * kernel))


def dissonance_curve(
    L: int,
    register: Register,
    timbre: Timbre,
    axis: CurveAxis = CurveAxis.FREQUENCY_DIFFERENCE,
) -> DissonanceCurve:
    """Sweep an L-semitone interval over every register position that fits."""
    if not 1 <= L <= 12:
        raise ValueError("interval size must be in [1, 12]")
    top = register.highest_index - L
    if top < register.lowest_index:
        raise ValueError(f"register too small for an interval of {L} semitones")

    ratio = 2.0 ** (L / 12.0)
    xs = np.empty(top - register.lowest_index + 1)
    ys = np.empty_like(xs)
    for n, idx in enumerate(range(register.lowest_index, top + 1)):
        f_i = tet_frequency(idx, register)
        f_j = tet_frequency(idx + L, register)
        if axis is CurveAxis.FREQUENCY_DIFFERENCE:
            xs[n] = f_j - f_i
        else:
            xs[n] = f_j * f_j - f_i * f_i
        ys[n] = complex_dissonance(f_i, ratio, timbre)
    return DissonanceCurve(L, axis, xs, ys)


def normalize_curves(curves: list[DissonanceCurve]) -> list[DissonanceCurve]:
    """Affine min-max normalization over the pooled points of all curves."""
    if not curves or any(len(c.dissonance) == 0 for c in curves):
        raise ValueError("normalize_curves needs nonempty curves")
    lo = min(float(c.dissonance.min()) for c in curves)
    hi = max(float(c.dissonance.max()) for c in curves)
    if hi == lo:
        raise ValueError("cannot normalize curves with zero value range")
    span = hi - lo
    return [
        DissonanceCurve(c.interval_size, c.axis, c.x, (c.dissonance - lo) / span)
        for c in curves
    ]


def _double_exp_residuals(params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    y0, a1, t1, a2, t2 = params
    return y0 + a1 * np.exp(-x / t1) + a2 * np.exp(-x / t2) - y


def _double_exp_jacobian(params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _, a1, t1, a2, t2 = params
    e1 = np.exp(-x / t1)
    e2 = np.exp(-x / t2)
    return np.column_stack([
        np.ones_like(x),
        e1,
        a1 * e1 * x / t1**2,
        e2,
        a2 * e2 * x / t2**2,
    ])


def fit_second_order_exp(curve: DissonanceCurve, seed: int = 0) -> SecondOrderExpFit:
    """Fit a second-order exponential decay to a dissonance curve.

    Eight seeded random starts place (t1, t2) log-uniformly over the decades
    spanned by the abscissa; each start solves the linear parameters exactly
    and then refines all five by damped least squares.  The best converged
    start wins; time constants are reported in increasing order.
    """
    x = np.asarray(curve.x, dtype=float)
    y = np.asarray(curve.dissonance, dtype=float)
    if len(x) < 6:
        raise ValueError("second-order exponential fit needs at least 6 points")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise FitConvergenceError("constant data: nothing to fit")

    # Work on x scaled to [0, ~1] for conditioning; rescale t afterwards.
    x_scale = float(np.max(np.abs(x)))
    xn = x / x_scale
    rng = np.random.default_rng(seed)

    best_sse = np.inf
    best: np.ndarray | None = None
    for _ in range(8):
        t1, t2 = 10.0 ** rng.uniform(-3.0, 1.0, size=2)
        design = np.column_stack([np.ones_like(xn), np.exp(-xn / t1), np.exp(-xn / t2)])
        lin, *_ = np.linalg.lstsq(design, y, rcond=None)
        p0 = np.array([lin[0], lin[1], t1, lin[2], t2])
        try:
            sol = least_squares(
                _double_exp_residuals,
                p0,
                jac=_double_exp_jacobian,
                args=(xn, y),
                method="trf",
                bounds=([-np.inf, -np.inf, 1e-9, -np.inf, 1e-9], [np.inf] * 5),
                xtol=1e-11,
                ftol=1e-11,
                max_nfev=500,
            )
        except (ValueError, np.linalg.LinAlgError):
            continue
        sse = float(np.sum(sol.fun**2))
        if sol.success and sse < best_sse:
            best_sse = sse
            best = sol.x
    if best is None:
        raise FitConvergenceError("no start of the double-exponential fit converged")

    y0, a1, t1, a2, t2 = best
    t1, t2 = t1 * x_scale, t2 * x_scale
    if t1 > t2:
        a1, a2, t1, t2 = a2, a1, t2, t1
    return SecondOrderExpFit(
        y0=float(y0),
        a1=float(a1),
        t1=float(t1),
        a2=float(a2),
        t2=float(t2),
        r_squared=1.0 - best_sse / ss_tot,
    )
