"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``NumericError`` -> 3.
"""


class SpikesimError(Exception):
    """Base class for all package errors."""


class ConfigError(SpikesimError, ValueError):
    """Invalid topology, scenario file, or model contract."""


class ContractError(ConfigError):
    """A value violated an operation's precondition (e.g. weight out of bounds)."""


class NumericError(SpikesimError, ArithmeticError):
    """Non-finite derivative or runaway state during integration.

    Carries optional context so callers higher up can enrich the message
    without losing the original location.
    """

    def __init__(self, message, *, component=None, step=None, neuron_id=None, t=None, dt=None):
        self.base_message = message
        self.component = component
        self.step = step
        self.neuron_id = neuron_id
        self.t = t
        self.dt = dt
        super().__init__(self._render())

    def _render(self):
        parts = [self.base_message]
        for key in ("component", "step", "neuron_id", "t", "dt"):
            val = getattr(self, key)
            if val is not None:
                parts.append(f"{key}={val}")
        return " ".join(parts)

    def with_context(self, **kw):
        for key, val in kw.items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        self.args = (self._render(),)
        return self


class InstabilityError(NumericError):
    """State left the physically meaningful range; usually dt is too large."""
