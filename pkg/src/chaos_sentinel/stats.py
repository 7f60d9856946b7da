"""Statistical checks shared by the generators, scheduler and adversary."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

SIGNIFICANCE = 0.01


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float

    def passed(self, alpha: float = SIGNIFICANCE) -> bool:
        return self.p_value > alpha


def chi_square_uniform(counts, min_expected: float = 5.0) -> ChiSquareResult:
    """Goodness of fit of ``counts`` against the uniform distribution."""
    counts = np.asarray(counts, dtype=float)
    k = counts.size
    if k < 2:
        raise ValueError("need at least two categories")
    expected = counts.sum() / k
    if expected < min_expected:
        raise ValueError(
            f"expected count per cell is {expected:.2f} < {min_expected}; "
            f"need at least {int(np.ceil(min_expected * k))} samples"
        )
    res = _st.chisquare(counts)
    return ChiSquareResult(float(res.statistic), k - 1, float(res.pvalue))


def serial_correlation(values, lag: int = 1) -> float:
    x = np.asarray(values, dtype=float)
    return float(np.corrcoef(x[:-lag], x[lag:])[0, 1])


def binomial_p_value(successes: int, trials: int, p: float) -> float:
    return float(_st.binomtest(successes, trials, p).pvalue)


def two_proportion_p_value(k1: int, n1: int, k2: int, n2: int) -> float:
    """Two-sided pooled z-test for equal proportions."""
    p = (k1 + k2) / (n1 + n2)
    se = np.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    if se == 0:
        return 1.0 if k1 * n2 == k2 * n1 else 0.0
    z = (k1 / n1 - k2 / n2) / se
    return float(2 * _st.norm.sf(abs(z)))
