"""Control-affine model container: xdot = f(x) + g(x) u."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class ControlAffineModel:
    """Evaluators for the drift f(x) and actuation g(x).

    nq marks mechanical structure: the state splits as x = (q, qd) with
    len(q) = nq, the drift is (qd, acc) and the actuation matrix has zero
    rows on the position block. Barrier machinery for relative degree two
    requires it.
    """

    n: int
    m: int
    drift: Callable
    actuation: Callable
    nq: Optional[int] = None
    rhs: Optional[Callable] = None

    def __post_init__(self):
        if self.rhs is None:
            drift, actuation = self.drift, self.actuation
            self.rhs = lambda x, u: drift(x) + actuation(x) @ u

    def closed_loop(self, controller):
        """State derivative under a feedback law, x -> f + g k(x)."""
        return lambda x: self.rhs(x, controller(x))
