"""Scenario description shared by the exact and mean-field paths."""

from dataclasses import asdict, dataclass, replace
from numbers import Integral, Real

from .errors import InvalidArgument
from .spin_algebra import EXCITED, GROUND, LEVELS


def _positive_int(name, value):
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise InvalidArgument(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _nonneg(name, value):
    if isinstance(value, bool) or not isinstance(value, Real) or not value >= 0:
        raise InvalidArgument(f"{name} must be a nonnegative number, got {value!r}")
    return float(value)


def _positive(name, value):
    if _nonneg(name, value) <= 0:
        raise InvalidArgument(f"{name} must be positive, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """One charger with ``n_charger`` spins and one battery per reservoir.

    Rates are in arbitrary units; only their ratios matter once time is
    rescaled to tau = n_charger * gamma_down * t (or gamma_up * t when
    gamma_down is zero). ``initial_levels`` lists the charger first, then
    the batteries; it defaults to an excited charger and ground batteries.
    """

    n_charger: int
    battery_sizes: tuple
    gamma_down: float = 1.0
    gamma_up: float = 0.0
    nbar: float = 0.0
    initial_levels: tuple = None
    tau_max: float = 50.0
    rtol: float = 1e-8
    atol: float = 1e-10
    output_stride: float = 0.1

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("n_charger", _positive_int("n_charger", self.n_charger))
        sizes = self.battery_sizes
        if isinstance(sizes, Integral):
            sizes = (sizes,)
        sizes = tuple(sizes)
        if not sizes:
            raise InvalidArgument("battery_sizes must list at least one battery")
        set_("battery_sizes", tuple(_positive_int("battery_sizes", n) for n in sizes))
        set_("gamma_down", _nonneg("gamma_down", self.gamma_down))
        set_("gamma_up", _nonneg("gamma_up", self.gamma_up))
        set_("nbar", _nonneg("nbar", self.nbar))
        if self.gamma_down == 0 and self.gamma_up == 0:
            raise InvalidArgument("gamma_down and gamma_up cannot both be zero")
        levels = self.initial_levels
        if levels is None:
            levels = (EXCITED,) + (GROUND,) * len(sizes)
        levels = tuple(levels)
        if len(levels) != len(sizes) + 1:
            raise InvalidArgument(
                f"initial_levels needs {len(sizes) + 1} entries (charger first), got {len(levels)}"
            )
        for lev in levels:
            if lev not in LEVELS:
                raise InvalidArgument(f"initial_levels entries must be in {LEVELS}, got {lev!r}")
        set_("initial_levels", levels)
        set_("tau_max", _positive("tau_max", self.tau_max))
        set_("rtol", _positive("rtol", self.rtol))
        set_("atol", _positive("atol", self.atol))
        set_("output_stride", _positive("output_stride", self.output_stride))
        if self.output_stride > self.tau_max:
            raise InvalidArgument("output_stride must not exceed tau_max")

    @property
    def n_batteries(self):
        return len(self.battery_sizes)

    @property
    def n_spins(self):
        return (self.n_charger,) + self.battery_sizes

    @property
    def dims(self):
        return tuple(n + 1 for n in self.n_spins)

    @property
    def labels(self):
        return ("C",) + tuple(f"B{m}" for m in range(1, self.n_batteries + 1))

    @property
    def time_scale(self):
        """Factor converting raw time to scaled time tau."""
        if self.gamma_down > 0:
            return self.n_charger * self.gamma_down
        return self.gamma_up

    def tau_grid(self, tau_max=None):
        import numpy as np

        tau_max = self.tau_max if tau_max is None else tau_max
        n = int(round(tau_max / self.output_stride))
        return np.linspace(0.0, n * self.output_stride, n + 1)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        d = asdict(self)
        d["battery_sizes"] = list(self.battery_sizes)
        d["initial_levels"] = list(self.initial_levels)
        return d
