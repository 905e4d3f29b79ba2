"""Scenario table for the figure panels.

All panels share one charger of 10^7 spins and batteries of 10^2 spins;
they differ in the number of reservoirs and the pump rate (in units of
gamma_down). The inset repeats panel f with the charger starting empty.
"""

from .scenario import ScenarioConfig
from .spin_algebra import EXCITED, GROUND

N_CHARGER = 10**7
N_BATTERY = 10**2
GAMMA_DOWN = 1.0
TAU_MAX = 50.0

# panel -> (reservoirs, gamma_up / gamma_down, charger starts excited)
PANELS = {
    "a": (1, 0.0, True),
    "b": (2, 0.0, True),
    "c": (2, 1.0, True),
    "d": (3, 0.0, True),
    "e": (3, 1.0, True),
    "f": (3, 2.0, True),
    "inset": (3, 2.0, False),
}

# the inset is plotted on panel f's horizon
HORIZON_FROM = {"inset": "f"}


def panel_scenario(panel, **overrides):
    try:
        m, pump, charged = PANELS[panel]
    except KeyError:
        raise KeyError(f"unknown panel {panel!r}; choose from {sorted(PANELS)}") from None
    levels = (EXCITED if charged else GROUND,) + (GROUND,) * m
    cfg = dict(
        n_charger=N_CHARGER,
        battery_sizes=(N_BATTERY,) * m,
        gamma_down=GAMMA_DOWN,
        gamma_up=pump * GAMMA_DOWN,
        initial_levels=levels,
        tau_max=TAU_MAX,
    )
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig(**cfg)
