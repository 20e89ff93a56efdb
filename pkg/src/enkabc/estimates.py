"""Log-likelihood estimate container shared by every estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class LogLikelihoodEstimate:
    """A log-domain likelihood estimate plus provenance.

    ``log_value`` is -inf exactly when ``degenerate`` is set: an estimate that
    is zero on the natural scale (no kernel acceptance, particle-weight
    collapse, or a positive-definiteness guard firing).  Degenerate estimates
    propagate through MCMC as certain rejections, never as exceptions.
    """

    log_value: float
    method: str
    T_used: int = 1
    skip_at: int | None = None
    degenerate: bool = False
    wall_time: float = 0.0

    def __post_init__(self):
        if math.isnan(self.log_value):
            raise ValueError(f"NaN log-likelihood from method {self.method!r}")
        if math.isinf(self.log_value) and self.log_value < 0:
            self.degenerate = True
