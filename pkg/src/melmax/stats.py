"""Branch histograms and constraint observables of melodic transitions.

Ascending and descending transitions are histogrammed separately over the
signed squared-frequency difference eps, each branch starting its bin
count at zero ([0, x) upward, (y, 0] downward).  Unisons are degenerate
between the two directions and are counted once in the zero-touching bin
of *each* branch, so bin probabilities sum to 1 + p_unison.  Branch bin
widths come from the Sturges rule on the branch counts; the merged
histogram uses the average of the two widths and extends symmetrically
far enough to cover the line's ambitus, giving the same number of bins
per branch.

The same bin grid supports a register baseline: the degeneracy of a bin
is the normalised number of realizable ordered pitch pairs whose eps
falls inside it, i.e. the transition distribution of a random line with
the same ambitus.  Kullback-Leibler divergence against that baseline
measures the order introduced by pitch selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest import MelodicLine, Transition
from .scales import PowerLawFit, Register, interval_size, tet_frequency

__all__ = [
    "SingleBranchError",
    "BinCoverageError",
    "HistBin",
    "BranchHistogram",
    "CumulativeCurves",
    "ExpFit",
    "Degeneracy",
    "Observables",
    "BinTerms",
    "sturges_bin_count",
    "branch_histograms",
    "ccdf_cdf",
    "fit_exponential",
    "enumerate_register_pairs",
    "bin_degeneracy",
    "kl_divergence",
    "observables",
    "bin_decomposition",
    "energy_density_difference",
]


class SingleBranchError(ValueError):
    """Transitions move in only one direction; both branches are required."""


class BinCoverageError(ValueError):
    """A value falls outside the histogram's bin coverage."""


def sturges_bin_count(n: int) -> int:
    """Bin count ceil(1 + log2(n)) for a sample of n values."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    return math.ceil(1.0 + math.log2(n))


@dataclass(frozen=True)
class HistBin:
    """One bin: 1-based index k, edges, midpoint representative, count, probability."""

    k: int
    lower: float
    upper: float
    eps_rep: float
    count: int
    p: float


@dataclass(frozen=True)
class BranchHistogram:
    """Merged two-branch histogram; descending bins first, then ascending."""

    bin_width: float
    bins: tuple[HistBin, ...]
    n_transitions: int
    n_unisons: int

    @property
    def n_half(self) -> int:
        return len(self.bins) // 2

    @property
    def descending(self) -> tuple[HistBin, ...]:
        return self.bins[: self.n_half]

    @property
    def ascending(self) -> tuple[HistBin, ...]:
        return self.bins[self.n_half :]

    @property
    def p_unison(self) -> float:
        return self.n_unisons / self.n_transitions

    def eps_reps(self) -> np.ndarray:
        return np.array([b.eps_rep for b in self.bins])

    def probabilities(self) -> np.ndarray:
        return np.array([b.p for b in self.bins])


def _bin_index(abs_eps: float, width: float, n_half: int) -> int:
    """Bin index of |eps| on a branch grid of n_half bins of the given width.

    Implements the zero-anchored half-open convention ([0, w) ascending,
    (-w, 0] descending); the outermost edge is closed so a value exactly
    at the coverage boundary stays inside.
    """
    k = int(abs_eps / width)
    if k >= n_half:
        if abs_eps <= n_half * width * (1.0 + 1e-9):
            return n_half - 1
        raise BinCoverageError(
            f"|eps| = {abs_eps} exceeds bin coverage {n_half * width}"
        )
    return k


def _build_bins(
    counts_desc: np.ndarray, counts_asc: np.ndarray, width: float, n_total: int
) -> tuple[HistBin, ...]:
    n_half = len(counts_desc)
    bins = []
    for pos in range(n_half):  # most negative bin first
        j = n_half - 1 - pos  # distance from zero
        lower = -(j + 1) * width
        count = int(counts_desc[j])
        bins.append(
            HistBin(pos + 1, lower, lower + width, lower + width / 2.0, count, count / n_total)
        )
    for j in range(n_half):
        lower = j * width
        count = int(counts_asc[j])
        bins.append(
            HistBin(
                n_half + j + 1, lower, lower + width, lower + width / 2.0, count, count / n_total
            )
        )
    return tuple(bins)


def branch_histograms(
    transitions: list[Transition], register: Register | None = None
) -> BranchHistogram:
    """Histogram ascending and descending transitions on a shared bin grid.

    Bin widths are set per branch by the Sturges rule (unisons count toward
    both branches) over the branch's largest |eps|, then averaged.  With a
    register the grid extends to the largest eps realizable in it, so the
    histogram aligns with :func:`bin_degeneracy` for the same register.
    """
    eps = np.array([t.eps for t in transitions])
    asc = eps[eps > 0]
    desc = -eps[eps < 0]
    n_unisons = int(np.sum(eps == 0))
    n_total = len(eps)
    if len(asc) == 0 or len(desc) == 0:
        raise SingleBranchError(
            "need at least one ascending and one descending transition "
            f"(got {len(asc)} ascending, {len(desc)} descending)"
        )

    w_asc = float(asc.max()) / sturges_bin_count(len(asc) + n_unisons)
    w_desc = float(desc.max()) / sturges_bin_count(len(desc) + n_unisons)
    width = 0.5 * (w_asc + w_desc)

    cover = max(float(asc.max()), float(desc.max()))
    if register is not None:
        f_lo = tet_frequency(register.lowest_index, register)
        f_hi = tet_frequency(register.highest_index, register)
        reg_cover = f_hi * f_hi - f_lo * f_lo
        if reg_cover < cover:
            raise BinCoverageError(
                "register does not span the observed transitions: "
                f"max |eps| {cover} > register range {reg_cover}"
            )
        cover = reg_cover
    n_half = max(1, math.ceil(cover / width * (1.0 - 1e-12)))

    counts_desc = np.zeros(n_half, dtype=int)
    counts_asc = np.zeros(n_half, dtype=int)
    for value in asc:
        counts_asc[_bin_index(float(value), width, n_half)] += 1
    for value in desc:
        counts_desc[_bin_index(float(value), width, n_half)] += 1
    counts_asc[0] += n_unisons
    counts_desc[0] += n_unisons

    return BranchHistogram(
        bin_width=width,
        bins=_build_bins(counts_desc, counts_asc, width, n_total),
        n_transitions=n_total,
        n_unisons=n_unisons,
    )


@dataclass(frozen=True)
class CumulativeCurves:
    """Bin-free branch distributions: CCDF ascending, CDF descending.

    ``asc_y[i]`` is the fraction of ascending-branch values >= ``asc_x[i]``;
    ``desc_y[i]`` the fraction of descending-branch values <= ``desc_x[i]``.
    Unisons belong to both branches.
    """

    asc_x: np.ndarray
    asc_y: np.ndarray
    desc_x: np.ndarray
    desc_y: np.ndarray


def ccdf_cdf(transitions: list[Transition]) -> CumulativeCurves:
    """Empirical CCDF (ascending branch) and CDF (descending branch)."""
    if not transitions:
        raise ValueError("no transitions")
    eps = np.array([t.eps for t in transitions])
    asc = np.sort(eps[eps >= 0])
    desc = np.sort(eps[eps <= 0])

    asc_x = np.unique(asc)
    # fraction of branch values >= x: count strictly below x, complement
    asc_y = 1.0 - np.searchsorted(asc, asc_x, side="left") / len(asc) if len(asc) else np.array([])
    desc_x = np.unique(desc)
    desc_y = (
        np.searchsorted(desc, desc_x, side="right") / len(desc) if len(desc) else np.array([])
    )
    return CumulativeCurves(asc_x, asc_y, desc_x, desc_y)


@dataclass(frozen=True)
class ExpFit:
    """Fit of y = amplitude * exp(-x / scale); r_squared on the original scale."""

    amplitude: float
    scale: float
    r_squared: float


def fit_exponential(x: np.ndarray, y: np.ndarray) -> ExpFit:
    """Least-squares line through (x, log y), reported as amplitude and decay scale."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise ValueError("exponential fit needs at least 2 points")
    if np.any(y <= 0):
        raise ValueError("exponential fit needs strictly positive y values")
    coef, *_ = np.linalg.lstsq(np.column_stack([np.ones_like(x), x]), np.log(y), rcond=None)
    amplitude = float(np.exp(coef[0]))
    slope = float(coef[1])
    scale = math.inf if slope == 0 else -1.0 / slope
    fitted = amplitude * np.exp(-x / scale) if math.isfinite(scale) else np.full_like(y, amplitude)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fitted) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ExpFit(amplitude, scale, r_squared)


def enumerate_register_pairs(register: Register) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All ordered pitch-index pairs of a register with their eps values.

    Returns (from_index, to_index, eps) arrays of length size**2, unisons
    included once.
    """
    idx = np.array(list(register.indices))
    freqs = np.array([tet_frequency(i, register) for i in idx])
    sq = freqs**2
    eps = sq[None, :] - sq[:, None]  # eps[i, j] = f_j^2 - f_i^2
    from_i, to_j = np.meshgrid(idx, idx, indexing="ij")
    return from_i.ravel(), to_j.ravel(), eps.ravel()


@dataclass(frozen=True)
class Degeneracy:
    """Register baseline aligned with a histogram's bins.

    ``q[k]`` is the fraction of realizable ordered pitch pairs in bin k,
    with unisons counted once per branch: sum(q) = 1 + q_unison.
    """

    q: np.ndarray
    register: Register
    n_pairs: int
    n_unisons: int

    @property
    def q_unison(self) -> float:
        return self.n_unisons / self.n_pairs


def bin_degeneracy(register: Register, hist: BranchHistogram) -> Degeneracy:
    """Count realizable register transitions per histogram bin, normalised."""
    _, _, eps = enumerate_register_pairs(register)
    n_half = hist.n_half
    width = hist.bin_width
    counts = np.zeros(2 * n_half, dtype=int)
    n_unisons = 0
    for value in eps:
        if value == 0:
            n_unisons += 1
            continue
        j = _bin_index(abs(float(value)), width, n_half)
        if value > 0:
            counts[n_half + j] += 1
        else:
            counts[n_half - 1 - j] += 1
    counts[n_half - 1] += n_unisons  # descending zero-touching bin
    counts[n_half] += n_unisons  # ascending zero-touching bin
    n_pairs = register.size**2
    return Degeneracy(counts / n_pairs, register, n_pairs, n_unisons)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Relative entropy sum(p * ln(p / q)) with the 0 * ln 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share the same bins")
    support = p > 0
    if np.any(q[support] <= 0):
        raise ValueError("support violation: p > 0 where q = 0")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


@dataclass(frozen=True)
class Observables:
    """Constraint observables of a line's histogram.

    Branch masses include the double-counted unisons; ``deltas`` holds the
    per-segment endpoint differences f_last**2 - f_first**2, whose total,
    per transition, measures how far the line drifts.
    """

    mass_desc: float
    mass_asc: float
    mean_abs_eps: float
    mean_eps: float
    deltas: tuple[float, ...]
    mean_abs_delta_per_transition: float


def observables(hist: BranchHistogram, line: MelodicLine) -> Observables:
    """Branch masses, bin-estimated moments, and segment drift of a line."""
    p = hist.probabilities()
    reps = hist.eps_reps()
    n_half = hist.n_half
    deltas = []
    for seg in line.segments:
        first = seg.pitches[0][1]
        last = seg.pitches[-1][1]
        deltas.append(last * last - first * first)
    n_transitions = line.transition_count()
    drift = abs(sum(deltas)) / n_transitions if n_transitions else 0.0
    return Observables(
        mass_desc=float(np.sum(p[:n_half])),
        mass_asc=float(np.sum(p[n_half:])),
        mean_abs_eps=float(np.sum(p * np.abs(reps))),
        mean_eps=float(np.sum(p * reps)),
        deltas=tuple(deltas),
        mean_abs_delta_per_transition=drift,
    )


@dataclass(frozen=True)
class BinTerms:
    """Per-bin split of the mean-|eps| estimate into interval-size terms.

    ``dispersion`` averages var(|f_to - f_from|)/L over the interval sizes
    L present in the bin; ``location`` averages mean(|f_to - f_from|)**2/L.
    Multiplied by the power-law amplitude and the bin probability, the two
    terms reconstruct the bin's contribution to <|eps|>.
    """

    k: int
    dispersion: float
    location: float
    count: int


def bin_decomposition(
    transitions: list[Transition], hist: BranchHistogram, fit: PowerLawFit
) -> list[BinTerms]:
    """Split each nonempty bin's |eps| estimate into dispersion and location terms.

    Groups a bin's member transitions by interval size; within each group
    the squared frequency difference decomposes into its variance plus its
    squared mean, each divided by the size.  Unisons carry no interval and
    are skipped; empty bins are skipped.
    """
    n_half = hist.n_half
    members: dict[int, list[tuple[int, float]]] = {}
    for t in transitions:
        if t.eps == 0:
            continue
        j = _bin_index(abs(t.eps), hist.bin_width, n_half)
        pos = n_half + j if t.eps > 0 else n_half - 1 - j
        size = abs(interval_size(t.f_from, t.f_to))
        members.setdefault(pos, []).append((size, abs(t.f_to - t.f_from)))

    out = []
    for pos in sorted(members):
        group = members[pos]
        by_size: dict[int, list[float]] = {}
        for size, diff in group:
            by_size.setdefault(size, []).append(diff)
        n_bin = len(group)
        dispersion = 0.0
        location = 0.0
        for size, diffs in by_size.items():
            arr = np.array(diffs)
            dispersion += len(diffs) * float(arr.var()) / size
            location += len(diffs) * float(arr.mean()) ** 2 / size
        out.append(BinTerms(pos + 1, dispersion / n_bin, location / n_bin, n_bin))
    return out


def energy_density_difference(
    f_i: float, f_j: float, rho: float = 1.2, amplitude: float = 1.0
) -> float:
    """Difference in mean energy density carried by two waves of equal amplitude.

    For waves in a medium of density ``rho`` the energy density grows with
    the squared frequency, so the difference is 2*pi**2*rho*amplitude
    times (f_j**2 - f_i**2).
    """
    if rho <= 0 or amplitude <= 0:
        raise ValueError("rho and amplitude must be positive")
    return 2.0 * math.pi**2 * rho * amplitude * (f_j * f_j - f_i * f_i)
