from dataclasses import dataclass
from typing import Optional

from models.parameter_set import ParameterSet


@dataclass(frozen=True)
class EmaGenerator:
    """Exponential moving average copy of the generator parameters.

    ``params`` is None for the all-zero starting copy; the first update blends against zero.
    """
    params: Optional[ParameterSet] = None
    momentum: float = 0.5

    @property
    def is_live(self) -> bool:
        return self.params is not None


def ema_update(ema: EmaGenerator, params: ParameterSet, momentum: float = None) -> EmaGenerator:
    """w_ema <- momentum * w_ema + (1 - momentum) * w, elementwise."""
    momentum = ema.momentum if momentum is None else momentum
    if not 0 <= momentum <= 1:
        raise ValueError(f"EMA momentum must lie in [0, 1], got {momentum}")
    previous = ema.params if ema.is_live else params.zeros_like()
    if previous.shapes() != params.shapes():
        raise ValueError(f"EMA shapes {previous.shapes()} do not match generator {params.shapes()}")
    blended = previous.map(lambda key, old: momentum * old + (1.0 - momentum) * params[key])
    return EmaGenerator(blended, momentum)
