"""Open-loop running plans for the actuated spring-loaded inverted pendulum."""
from .model import Mode, Params, State

__version__ = "0.1.0"
__all__ = ["Mode", "Params", "State"]
