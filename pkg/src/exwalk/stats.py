"""Small shared statistics helpers: interval estimates for trial counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .lattice import RangeError
from .words import StreamSeed

Z95 = 1.96


def wilson_ci(successes: int, decided: int, z: float = Z95) -> tuple:
    """Wilson score interval for a binomial proportion.

    Returns (nan, nan) when no trial decided, matching the convention that
    a fully censored estimate is reported rather than invented.
    """
    if successes < 0 or decided < 0 or successes > decided:
        raise RangeError(
            f"need 0 <= successes <= decided, got {successes}/{decided}"
        )
    if decided == 0:
        return (math.nan, math.nan)
    p = successes / decided
    z2 = z * z
    denom = 1.0 + z2 / decided
    center = (p + z2 / (2 * decided)) / denom
    half = (
        z
        * math.sqrt(p * (1.0 - p) / decided + z2 / (4.0 * decided * decided))
        / denom
    )
    return (max(0.0, center - half), min(1.0, center + half))


def normal_ci(mean: float, se: float, z: float = Z95) -> tuple:
    return (mean - z * se, mean + z * se)


@dataclass(frozen=True)
class EnEstimate:
    """Back-crossing trial tallies at one index, with a Wilson interval.

    hits, completions, and censored partition the trials; p_hat is
    hits / (trials - censored) and is nan when every trial censored.
    """

    n: int
    trials: int
    hits: int
    completions: int
    censored: int
    p_hat: float
    wilson_ci: tuple
    seed: StreamSeed | None = None
    horizon: int | None = None

    def __post_init__(self):
        if min(self.trials, self.hits, self.completions, self.censored) < 0:
            raise RangeError("trial tallies must be nonnegative")
        if self.hits + self.completions + self.censored != self.trials:
            raise RangeError(
                "hits + completions + censored must equal trials, got "
                f"{self.hits}+{self.completions}+{self.censored} != {self.trials}"
            )

    @classmethod
    def from_counts(
        cls,
        n: int,
        trials: int,
        hits: int,
        completions: int,
        censored: int,
        seed: StreamSeed | None = None,
        horizon: int | None = None,
    ) -> "EnEstimate":
        decided = trials - censored
        p_hat = hits / decided if decided > 0 else math.nan
        return cls(
            n=n,
            trials=trials,
            hits=hits,
            completions=completions,
            censored=censored,
            p_hat=p_hat,
            wilson_ci=wilson_ci(hits, decided),
            seed=seed,
            horizon=horizon,
        )

    @property
    def decided(self) -> int:
        return self.trials - self.censored
