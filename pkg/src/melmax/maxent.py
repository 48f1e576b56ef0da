"""Constrained relative-entropy model of a melodic line's transition histogram.

Among all bin distributions with the observed branch masses, the model
picks the one closest (in relative entropy) to the register baseline q
while matching two macroscopic observables: the mean |eps| (preference
for interval size and register position) and the mean signed eps
(ascending/descending asymmetry).  The minimiser is a two-sided
exponential tilt of q,

    p_k  proportional to  q_k * exp(-lambda1*|eps_k| - lambda2*eps_k),

normalised within each branch to its mass.  Because the tilt acts on
|eps_k| branch-wise, the two multipliers are recovered from two
independent monotone one-dimensional problems, one per branch; each is
solved by bracketed bisection polished with Newton steps.

``lambda1`` sets the decay scale of both branches (register location,
consonance level, transposition); ``lambda2`` the asymmetry between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scales import Register
from .stats import (
    BranchHistogram,
    CumulativeCurves,
    Degeneracy,
    ExpFit,
    Observables,
    _bin_index,
    enumerate_register_pairs,
    fit_exponential,
)

__all__ = [
    "InfeasibleTargetsError",
    "DisaggregationError",
    "ModelInputs",
    "ModelSolution",
    "DisaggregationMode",
    "DisaggregatedModel",
    "BranchComparison",
    "ComparisonReport",
    "model_distribution",
    "model_expectations",
    "solve_lagrange",
    "disaggregate",
    "compare",
]


class InfeasibleTargetsError(ValueError):
    """Target expectations lie outside the attainable range; carries the bounds."""

    def __init__(self, message: str, attainable: tuple[float, float]):
        super().__init__(f"{message}; attainable range {attainable}")
        self.attainable = attainable


class DisaggregationError(ValueError):
    """A bin carries probability but no realizable transition."""


@dataclass(frozen=True)
class ModelInputs:
    """Everything the model needs: baseline, bin grid, masses, and targets."""

    q: np.ndarray
    eps_rep: np.ndarray
    mass_desc: float
    mass_asc: float
    target_abs: float
    target_signed: float

    def __post_init__(self) -> None:
        n = len(self.q)
        if n != len(self.eps_rep):
            raise ValueError("q and eps_rep must align")
        if n == 0 or n % 2:
            raise ValueError("bin count must be positive and even")

    @property
    def n_half(self) -> int:
        return len(self.q) // 2

    @classmethod
    def from_analysis(
        cls, hist: BranchHistogram, degeneracy: Degeneracy, obs: Observables
    ) -> "ModelInputs":
        return cls(
            q=np.asarray(degeneracy.q, dtype=float),
            eps_rep=hist.eps_reps(),
            mass_desc=obs.mass_desc,
            mass_asc=obs.mass_asc,
            target_abs=obs.mean_abs_eps,
            target_signed=obs.mean_eps,
        )


@dataclass(frozen=True)
class ModelSolution:
    lambda1: float
    lambda2: float
    p: np.ndarray
    achieved_abs: float
    achieved_signed: float
    iterations: int


def model_distribution(inputs: ModelInputs, lambda1: float, lambda2: float) -> np.ndarray:
    """Tilted baseline distribution for given multipliers.

    Each branch is normalised to its mass; exponents are shifted by the
    branch maximum before exponentiation so large multiplier-times-eps
    products cannot overflow.
    """
    eps = inputs.eps_rep
    exponent = -lambda1 * np.abs(eps) - lambda2 * eps
    n_half = inputs.n_half
    p = np.zeros_like(inputs.q)
    for sl, mass in (
        (slice(0, n_half), inputs.mass_desc),
        (slice(n_half, len(eps)), inputs.mass_asc),
    ):
        q = inputs.q[sl]
        active = q > 0
        if not np.any(active):
            raise ValueError("branch has no baseline support")
        shifted = exponent[sl] - np.max(exponent[sl][active])
        weights = np.where(active, q * np.exp(shifted), 0.0)
        p[sl] = mass * weights / weights.sum()
    return p


def model_expectations(p: np.ndarray, eps_rep: np.ndarray) -> tuple[float, float]:
    """(sum p|eps|, sum p*eps) over the bin representatives."""
    p = np.asarray(p, dtype=float)
    eps_rep = np.asarray(eps_rep, dtype=float)
    if p.shape != eps_rep.shape:
        raise ValueError("p and eps_rep must align")
    return float(np.sum(p * np.abs(eps_rep))), float(np.sum(p * eps_rep))


def _branch_mean_abs(alpha: float, abs_eps: np.ndarray, q: np.ndarray) -> float:
    """Mean |eps| of one branch under the tilt exp(-alpha * |eps|)."""
    shifted = -alpha * abs_eps
    shifted -= shifted.max()
    w = q * np.exp(shifted)
    return float(np.sum(w * abs_eps) / np.sum(w))


def _solve_branch(
    target: float, abs_eps: np.ndarray, q: np.ndarray, rel_tol: float
) -> tuple[float, int]:
    """Solve mean|eps|(alpha) = target on one branch; returns (alpha, iterations).

    The branch mean is strictly decreasing in alpha with open range
    (min |eps|, max |eps|) over the supported bins, so a sign-changing
    bracket always exists for a feasible target.
    """
    active = q > 0
    abs_eps = abs_eps[active]
    q = q[active]
    lo_val, hi_val = float(abs_eps.min()), float(abs_eps.max())
    if len(abs_eps) == 1:
        if abs(target - lo_val) <= rel_tol * lo_val:
            return 0.0, 0
        raise InfeasibleTargetsError(
            f"single-bin branch pins the mean at {lo_val}, target {target}",
            (lo_val, hi_val),
        )
    if not lo_val < target < hi_val:
        raise InfeasibleTargetsError(
            f"branch target {target} outside attainable mean-|eps| range",
            (lo_val, hi_val),
        )

    scale = 1.0 / hi_val
    lo, hi = -scale, scale
    iterations = 0
    while _branch_mean_abs(lo, abs_eps, q) < target:
        lo *= 4.0
        iterations += 1
        if iterations > 200:
            raise InfeasibleTargetsError(
                f"bracket expansion failed for target {target}", (lo_val, hi_val)
            )
    while _branch_mean_abs(hi, abs_eps, q) > target:
        hi *= 4.0
        iterations += 1
        if iterations > 400:
            raise InfeasibleTargetsError(
                f"bracket expansion failed for target {target}", (lo_val, hi_val)
            )

    # Bisection until the mean is within a fraction of the tolerance.
    alpha = 0.5 * (lo + hi)
    for _ in range(200):
        iterations += 1
        mean = _branch_mean_abs(alpha, abs_eps, q)
        if abs(mean - target) <= 0.1 * rel_tol * target:
            break
        if mean > target:
            lo = alpha
        else:
            hi = alpha
        alpha = 0.5 * (lo + hi)

    # Newton polish: d mean / d alpha = -variance under the tilt.
    for _ in range(8):
        iterations += 1
        shifted = -alpha * abs_eps
        shifted -= shifted.max()
        w = q * np.exp(shifted)
        w /= w.sum()
        mean = float(np.sum(w * abs_eps))
        var = float(np.sum(w * (abs_eps - mean) ** 2))
        if var == 0.0:
            break
        step = (mean - target) / var
        new_alpha = alpha + step
        if not lo <= new_alpha <= hi:
            break
        alpha = new_alpha
        if abs(step) <= 1e-15 * max(abs(alpha), scale):
            break
    return alpha, iterations


def solve_lagrange(inputs: ModelInputs, tolerance: float = 0.01) -> ModelSolution:
    """Recover the multipliers matching the target expectations.

    The branch masses split the two targets into one mean-|eps| equation
    per branch: mass_asc * e_asc = (target_abs + target_signed)/2 and
    mass_desc * e_desc = (target_abs - target_signed)/2.  Each equation is
    monotone in its branch tilt rate alpha; lambda1 and lambda2 are the
    half-sum and half-difference of the two rates.  Deterministic for
    fixed inputs.
    """
    if not 0 < tolerance <= 0.5:
        raise ValueError("tolerance must be in (0, 0.5]")
    if inputs.mass_desc <= 0 or inputs.mass_asc <= 0:
        raise ValueError("branch masses must be positive")
    t_asc = 0.5 * (inputs.target_abs + inputs.target_signed) / inputs.mass_asc
    t_desc = 0.5 * (inputs.target_abs - inputs.target_signed) / inputs.mass_desc
    if t_asc <= 0 or t_desc <= 0:
        raise InfeasibleTargetsError(
            "targets imply a nonpositive branch mean", (0.0, inputs.target_abs)
        )

    n_half = inputs.n_half
    abs_eps = np.abs(inputs.eps_rep)
    # inner tolerance well below the requested one so both combined
    # expectations land inside it
    inner = min(tolerance, 1e-3) * 0.25
    alpha_desc, it_d = _solve_branch(t_desc, abs_eps[:n_half], inputs.q[:n_half], inner)
    alpha_asc, it_a = _solve_branch(t_asc, abs_eps[n_half:], inputs.q[n_half:], inner)

    lambda1 = 0.5 * (alpha_asc + alpha_desc)
    lambda2 = 0.5 * (alpha_asc - alpha_desc)
    p = model_distribution(inputs, lambda1, lambda2)
    achieved_abs, achieved_signed = model_expectations(p, inputs.eps_rep)
    return ModelSolution(
        lambda1=lambda1,
        lambda2=lambda2,
        p=p,
        achieved_abs=achieved_abs,
        achieved_signed=achieved_signed,
        iterations=it_d + it_a,
    )


class DisaggregationMode(Enum):
    UNIFORM = "uniform"
    SEEDED_RANDOM = "random"


@dataclass(frozen=True)
class DisaggregatedModel:
    """Bin probabilities spread over the individual register transitions.

    Rows of ``transitions`` are (from_index, to_index, eps, probability);
    unison pairs appear twice, once per branch.  The cumulative curves are
    branch-conditional, comparable to the empirical ones.
    """

    transitions: tuple[tuple[int, int, float, float], ...]
    curves: CumulativeCurves


def disaggregate(
    p: np.ndarray,
    inputs: ModelInputs,
    register: Register,
    mode: DisaggregationMode = DisaggregationMode.SEEDED_RANDOM,
    seed: int | None = None,
) -> DisaggregatedModel:
    """Split each bin's probability across its realizable transitions.

    ``SEEDED_RANDOM`` draws the within-bin split from a flat simplex
    (requires a seed and is reproducible for a fixed one); ``UNIFORM``
    splits equally.
    """
    if mode is DisaggregationMode.SEEDED_RANDOM and seed is None:
        raise ValueError("random disaggregation requires a seed")
    rng = np.random.default_rng(seed)

    n_half = inputs.n_half
    width = float(inputs.eps_rep[n_half] * 2.0)  # first ascending midpoint = w/2
    from_i, to_j, eps = enumerate_register_pairs(register)

    bin_members: dict[int, list[int]] = {pos: [] for pos in range(2 * n_half)}
    for row, value in enumerate(eps):
        if value == 0:
            bin_members[n_half - 1].append(row)
            bin_members[n_half].append(row)
            continue
        j = _bin_index(abs(float(value)), width, n_half)
        pos = n_half + j if value > 0 else n_half - 1 - j
        bin_members[pos].append(row)

    rows: list[tuple[int, int, float, float]] = []
    branch_of_row: list[int] = []
    for pos in range(2 * n_half):
        member_rows = bin_members[pos]
        mass = float(p[pos])
        if not member_rows:
            if mass > 0:
                raise DisaggregationError(
                    f"bin {pos + 1} has probability {mass} but no realizable transition"
                )
            continue
        m = len(member_rows)
        if mode is DisaggregationMode.UNIFORM:
            shares = np.full(m, mass / m)
        else:
            shares = mass * rng.dirichlet(np.ones(m))
        for row, share in zip(member_rows, shares):
            rows.append((int(from_i[row]), int(to_j[row]), float(eps[row]), float(share)))
            branch_of_row.append(0 if pos < n_half else 1)

    curves = _cumulative_from_weighted(rows, branch_of_row)
    return DisaggregatedModel(tuple(rows), curves)


def _cumulative_from_weighted(
    rows: list[tuple[int, int, float, float]], branch: list[int]
) -> CumulativeCurves:
    asc = {}
    desc = {}
    for (_, _, eps, prob), side in zip(rows, branch):
        book = asc if side == 1 else desc
        book[eps] = book.get(eps, 0.0) + prob

    def tail(book: dict[float, float], descending_from_top: bool):
        xs = np.array(sorted(book))
        ps = np.array([book[x] for x in xs])
        total = ps.sum()
        if descending_from_top:  # fraction >= x
            ys = ps[::-1].cumsum()[::-1] / total
        else:  # fraction <= x
            ys = ps.cumsum() / total
        return xs, ys

    asc_x, asc_y = tail(asc, True) if asc else (np.array([]), np.array([]))
    desc_x, desc_y = tail(desc, False) if desc else (np.array([]), np.array([]))
    return CumulativeCurves(asc_x, asc_y, desc_x, desc_y)


@dataclass(frozen=True)
class BranchComparison:
    model: ExpFit
    empirical: ExpFit
    amplitude_rel_diff: float
    scale_rel_diff: float
    same_order: bool


@dataclass(frozen=True)
class ComparisonReport:
    ascending: BranchComparison
    descending: BranchComparison


def _fit_branch(x: np.ndarray, y: np.ndarray) -> ExpFit:
    keep = y > 0
    return fit_exponential(np.abs(x[keep]), y[keep])


def compare(model: CumulativeCurves, empirical: CumulativeCurves) -> ComparisonReport:
    """Exponential fits of both cumulative curve pairs, branch by branch.

    Descending branches are fitted against |eps| so both decay scales are
    positive; ``same_order`` flags parameters within a factor of ten.
    """
    out = {}
    for name, mx, my, ex, ey in (
        ("ascending", model.asc_x, model.asc_y, empirical.asc_x, empirical.asc_y),
        ("descending", model.desc_x, model.desc_y, empirical.desc_x, empirical.desc_y),
    ):
        fit_m = _fit_branch(mx, my)
        fit_e = _fit_branch(ex, ey)
        amp_diff = abs(fit_m.amplitude - fit_e.amplitude) / abs(fit_e.amplitude)
        scale_diff = abs(fit_m.scale - fit_e.scale) / abs(fit_e.scale)
        same_order = (
            0.1 <= fit_m.amplitude / fit_e.amplitude <= 10.0
            and 0.1 <= fit_m.scale / fit_e.scale <= 10.0
        )
        out[name] = BranchComparison(fit_m, fit_e, amp_diff, scale_diff, same_order)
    return ComparisonReport(ascending=out["ascending"], descending=out["descending"])
