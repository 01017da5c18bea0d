"""
Exception hierarchy for the simulator.

Every error derives from SimulationError so the CLI can catch one type;
each also derives from the builtin it specializes, so callers that only
know about ValueError / ZeroDivisionError still work.
"""


class SimulationError(Exception):
    """Base class for all simulator errors"""


class ConfigError(SimulationError, ValueError):
    """Invalid configuration value or violated precondition"""


class DegenerateSettingError(SimulationError, ZeroDivisionError):
    """All four projection probabilities of a correlation vanish"""


class ZeroTotalError(SimulationError, ZeroDivisionError):
    """Visibility requested with c_max + c_min = 0"""


class NoSolutionError(SimulationError, ValueError):
    """Wavelength split has no physical signal/idler solution"""


class OutOfGridError(SimulationError, ValueError):
    """Lookup outside the mode-hop map grid"""


class FitConvergenceError(SimulationError, RuntimeError):
    """Curve fit hit its evaluation cap without converging"""


class DegenerateDataError(SimulationError, ValueError):
    """Data cannot constrain the fit (constant, too few points, too narrow)"""


class MissingSettingError(SimulationError, KeyError):
    """CHSH extraction is missing a curve or an analyzer angle"""


class NotOperableError(SimulationError, RuntimeError):
    """Experiment requested outside the thermal operating window"""
