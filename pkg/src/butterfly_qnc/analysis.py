"""Count-based estimators, witness evaluation and aggregate statistics.

Uncertainties use first-order Gaussian propagation of independent Poisson
counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .quantum import SeedLike, as_rng

# Average-fidelity bounds without prior entanglement. The single-qubit bound
# is quoted both as 0.9503 and 0.9504; 0.9503 is the default threshold.
SINGLE_QUBIT_BOUND = 0.9503
SINGLE_QUBIT_BOUND_ALT = 0.9504
ENTANGLEMENT_BOUND = 0.9256

DEFAULT_BIN_WIDTH = 0.005


@dataclass(frozen=True)
class CountRecord:
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError(f"counts must be nonnegative, got {self.n_plus}, {self.n_minus}")

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus


@dataclass(frozen=True)
class Estimate:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


@dataclass(frozen=True)
class SituationResult:
    """One tabulated fidelity with its weight in the average.

    ``labels`` are the input-state labels (empty in entanglement mode),
    ``outcomes`` the forced BSM outcome pair as frame strings (``"10"``), and
    ``stream`` which of the two simultaneously delivered streams this is.
    """

    labels: tuple[str, ...]
    outcomes: tuple[str, str]
    probability_weight: float
    fidelity: Estimate
    stream: int = 1


def _require_counts(c: CountRecord) -> None:
    if c.total <= 0:
        raise ValueError("estimator needs at least one count")


def fidelity_from_counts(c: CountRecord) -> Estimate:
    """F = N+ / (N+ + N-), sigma = sqrt(N+ N- / N^3)."""
    _require_counts(c)
    n = c.total
    return Estimate(c.n_plus / n, math.sqrt(c.n_plus * c.n_minus / n**3))


def expectation_from_counts(c: CountRecord) -> Estimate:
    """<O> = (N+ - N-) / (N+ + N-), sigma = 2 sqrt(N+ N- / N^3)."""
    _require_counts(c)
    n = c.total
    return Estimate((c.n_plus - c.n_minus) / n, 2.0 * math.sqrt(c.n_plus * c.n_minus / n**3))


def witness_fidelity(exx: Estimate, eyy: Estimate, ezz: Estimate) -> tuple[Estimate, Estimate]:
    """Fidelity with |Phi+> from the XX, YY, ZZ correlators, and the witness value.

    F = (1 + <XX> - <YY> + <ZZ>) / 4 and <W> = 1/2 - F for W = I/2 - |Phi+><Phi+|.
    """
    for e in (exx, eyy, ezz):
        if not -1.0 - 1e-12 <= e.value <= 1.0 + 1e-12:
            raise ValueError(f"correlator {e.value} outside [-1, 1]")
    f = (1.0 + exx.value - eyy.value + ezz.value) / 4.0
    sigma = math.sqrt(exx.sigma**2 + eyy.sigma**2 + ezz.sigma**2) / 4.0
    return Estimate(f, sigma), Estimate(0.5 - f, sigma)


def weighted_average(results: Sequence[SituationResult]) -> Estimate:
    weights = np.array([r.probability_weight for r in results], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"situation weights sum to {weights.sum():.12g}, expected 1")
    values = np.array([r.fidelity.value for r in results])
    sigmas = np.array([r.fidelity.sigma for r in results])
    return Estimate(float(weights @ values), float(np.sqrt(np.sum(weights**2 * sigmas**2))))


def significance(fbar: Estimate, threshold: float) -> float:
    """Distance of ``fbar`` above ``threshold`` in standard deviations."""
    if fbar.sigma <= 0:
        raise ValueError("significance is undefined for a deterministic estimate (sigma = 0)")
    return (fbar.value - threshold) / fbar.sigma


def simulate_counts(true_prob: float, total_expected: float, rng_seed: SeedLike = None) -> CountRecord:
    """Poisson total split binomially into (N+, N-)."""
    if not 0.0 <= true_prob <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {true_prob}")
    if total_expected <= 0:
        raise ValueError("expected total must be positive")
    rng = as_rng(rng_seed)
    total = int(rng.poisson(total_expected))
    n_plus = int(rng.binomial(total, true_prob))
    return CountRecord(n_plus, total - n_plus)


def histogram(results: Sequence[SituationResult], bin_width: float = DEFAULT_BIN_WIDTH) -> list[tuple[float, float]]:
    """Probability-weighted histogram with left-closed, right-open bins.

    Returns ``(bin_left_edge, mass)`` pairs for the occupied bins, sorted by
    edge. Masses are normalized to sum to one.
    """
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    masses: dict[int, float] = {}
    for r in results:
        # nudge so values a few ulps below an edge land in the upper bin
        idx = math.floor(r.fidelity.value / bin_width + 1e-9)
        masses[idx] = masses.get(idx, 0.0) + r.probability_weight
    total = sum(masses.values())
    if total <= 0:
        return []
    return [(round(idx * bin_width, 12), mass / total) for idx, mass in sorted(masses.items())]
