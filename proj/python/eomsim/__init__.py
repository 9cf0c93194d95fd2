"""Heralded single-photon electro-optic modulation simulator.

Thin wrapper over the compiled core: reports come back as dictionaries with
the same layout as the CLI's report.json.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Optional

from ._core import (
    EomsimError,
    Scenario,
    back_out_losses,
    g2_cond,
    group_delay_from_velocity,
    modulator_transfer,
    predistort,
    reference_eta_ledger,
)
from . import _core

__all__ = [
    "EomsimError",
    "Scenario",
    "load",
    "run",
    "run_controls",
    "floor_curve",
    "back_out_losses",
    "g2_cond",
    "group_delay_from_velocity",
    "modulator_transfer",
    "predistort",
    "reference_eta_ledger",
]


def load(path: str | os.PathLike) -> Scenario:
    """Parse and validate a scenario file."""
    return Scenario.load(os.fspath(path))


def _scenario(s: Scenario | str | os.PathLike) -> Scenario:
    return s if isinstance(s, Scenario) else load(s)


def run(
    scenario: Scenario | str | os.PathLike,
    *,
    seed: Optional[int] = None,
    workers: int = 1,
    time_scale: float = 1.0,
    out: Optional[str | os.PathLike] = None,
) -> dict:
    """Simulate a scenario. With `out`, also writes the report and data files there."""
    text = _core.run(
        _scenario(scenario),
        seed=seed,
        workers=workers,
        time_scale=time_scale,
        out=None if out is None else os.fspath(out),
    )
    return json.loads(text)


def run_controls(
    scenario: Scenario | str | os.PathLike,
    *,
    seed: Optional[int] = None,
    workers: int = 1,
    time_scale: float = 1.0,
) -> tuple[dict, dict]:
    """No-fiber and externally clocked controls of a scenario."""
    a, b = _core.run_controls(_scenario(scenario), seed=seed, workers=workers, time_scale=time_scale)
    return json.loads(a), json.loads(b)


def floor_curve(
    scenario: Scenario | str | os.PathLike,
    rates: Iterable[float],
    *,
    heralds: float = 2e5,
    seed: Optional[int] = None,
    workers: int = 1,
) -> list[dict]:
    """g2_cond floor and with-background value at each emitted Stokes rate."""
    text = _core.floor_curve(_scenario(scenario), list(rates), heralds=heralds, seed=seed, workers=workers)
    return json.loads(text)
