"""Shared fixtures: solved instances are expensive, so they are built once
per session and shared across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from drawdiv import curves as CU
from drawdiv import surface as SF
from drawdiv.model import ModelParams

BASE = dict(mu=4.0, sigma=2.0, q=0.1)


def params(a: float, cbar: float) -> ModelParams:
    return ModelParams(a=a, cbar=cbar, **BASE)


@pytest.fixture(scope="session")
def solved():
    """Heun-solved curves with amplitude, keyed by (a, cbar); lazy cache."""
    cache: dict = {}

    def get(a: float, cbar: float, n_steps: int = 2000, stepper: str = "heun"):
        key = (a, cbar, n_steps, stepper)
        if key not in cache:
            p = params(a, cbar)
            cv = CU.solve_curves(p, n_steps=n_steps, stepper=stepper)
            cache[key] = CU.solve_A(p, cv, stepper=stepper)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def surfaces(solved):
    """Value surfaces for the reference instances, keyed by (a, cbar)."""
    cache: dict = {}

    def get(a: float, cbar: float = 3.0):
        key = (a, cbar)
        if key not in cache:
            cache[key] = SF.build_surface(params(a, cbar), solved(a, cbar))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def surface_05(surfaces):
    return surfaces(0.5, 3.0)


def rel_err(got: float, want: float) -> float:
    return abs(got - want) / max(1e-300, abs(want))
