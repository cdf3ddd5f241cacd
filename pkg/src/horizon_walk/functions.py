"""Test functions with known Laplacians, per catalog manifold.

Every function is evaluated batched as ``f(x, frame)``; functions on the
base manifold ignore the frame (they are f̄∘π when used on O(M)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import UnsupportedFunction


@dataclass(frozen=True)
class TestFunction:
    __test__ = False  # not a pytest class

    name: str
    manifold: Optional[str]
    fn: Callable
    laplacian: Optional[Callable] = None
    eigenvalue: Optional[float] = None
    on_frames: bool = False
    smoothness: str = "C^inf"
    support: str = "whole chart; bounded with bounded derivatives on the experiment region"
    quadratic: bool = False

    def __call__(self, x, frame=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.fn(x, None if frame is None else np.asarray(frame, dtype=float))

    def exact_laplacian(self, x) -> np.ndarray:
        if self.laplacian is None:
            raise UnsupportedFunction(f"{self.name} has no analytic Laplacian")
        return self.laplacian(np.asarray(x, dtype=float))


def _base(name, manifold, f, lap, eig=None, quadratic=False) -> TestFunction:
    return TestFunction(name, manifold, lambda x, E: f(x), lap, eig, quadratic=quadratic)


def _eigen(name, manifold, f, lam) -> TestFunction:
    return TestFunction(name, manifold, lambda x, E: f(x), lambda x: -lam * f(x), lam)


def constant(c: float = 1.0) -> TestFunction:
    return TestFunction("constant", None, lambda x, E: np.full(x.shape[:-1], float(c)),
                        lambda x: np.zeros(x.shape[:-1]), 0.0, quadratic=True)


def frame_entry(i: int, j: int) -> TestFunction:
    """u ↦ (u e_j)^i, a function of the frame alone."""
    def f(x, E):
        if E is None:
            raise UnsupportedFunction("frame_entry needs a frame")
        return E[..., i, j]
    return TestFunction(f"frame{i + 1}{j + 1}", None, f, on_frames=True)


_X1 = lambda x: x[..., 0]
_X2 = lambda x: x[..., 1]

CATALOG = {
    "euclidean": (
        _base("x1^2", "euclidean", lambda x: _X1(x) ** 2, lambda x: np.full(x.shape[:-1], 2.0), quadratic=True),
        _base("x1*x2", "euclidean", lambda x: _X1(x) * _X2(x), lambda x: np.zeros(x.shape[:-1]), quadratic=True),
        _eigen("sin(x1)", "euclidean", lambda x: np.sin(_X1(x)), 1.0),
    ),
    "sphere": (
        _eigen("cos(theta)", "sphere", lambda x: np.cos(_X1(x)), 2.0),
        _eigen("sin^2(theta)cos(2phi)", "sphere", lambda x: np.sin(_X1(x)) ** 2 * np.cos(2 * _X2(x)), 6.0),
    ),
    "hyperbolic": (
        _base("log(y)", "hyperbolic", lambda x: np.log(_X2(x)), lambda x: np.full(x.shape[:-1], -1.0)),
        _base("y", "hyperbolic", lambda x: _X2(x), lambda x: np.zeros(x.shape[:-1])),
    ),
    "torus": (
        _eigen("cos(x1)", "torus", lambda x: np.cos(_X1(x)), 1.0),
        _eigen("cos(x1)cos(x2)", "torus", lambda x: np.cos(_X1(x)) * np.cos(_X2(x)), 2.0),
    ),
}


def catalog(manifold: str) -> tuple:
    try:
        return CATALOG[manifold]
    except KeyError:
        raise ValueError(f"no test functions for manifold {manifold!r}") from None


def get_function(manifold: str, name: str) -> TestFunction:
    for f in catalog(manifold):
        if f.name == name:
            return f
    if name == "constant":
        return constant()
    names = ", ".join(f.name for f in catalog(manifold))
    raise UnsupportedFunction(f"{name!r} is not in the {manifold} catalog ({names})")
