"""First-order Sobol indices: Saltelli sampling design with Jansen's estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc, triang

from .adt import propagate_bottom_up

DEFAULT_SAMPLES = 2**14


@dataclass
class SobolResult:
    names: list[str]
    first_order: np.ndarray
    variance: float
    samples: int
    defined: bool

    def to_dict(self) -> dict:
        return {
            "names": self.names,
            "first_order": [None if not self.defined else float(s) for s in self.first_order],
            "variance": self.variance,
            "samples": self.samples,
            "defined": self.defined,
        }


def _scale(u, dists):
    out = np.empty_like(u)
    for j, d in enumerate(dists):
        kind = d[0]
        if kind == "uniform":
            lo, hi = d[1], d[2]
            out[:, j] = lo + (hi - lo) * u[:, j]
        elif kind == "triangular":
            lo, mode, hi = d[1], d[2], d[3]
            c = (mode - lo) / (hi - lo)
            out[:, j] = triang.ppf(u[:, j], c, loc=lo, scale=hi - lo)
        else:
            raise ValueError(f"unsupported (unbounded or unknown) distribution {kind!r}")
    return out


def sobol_first_order(model, distributions, n: int = DEFAULT_SAMPLES, seed: int = 0, names=None) -> SobolResult:
    """S_i = (V - E[(f(B) - f(A_B^i))^2] / 2) / V over N base samples.

    ``model`` maps an (m, d) array to m outputs. ``distributions`` lists
    ("uniform", lo, hi) or ("triangular", lo, mode, hi) per input. Base
    matrices A and B are the two halves of a scrambled 2d-dimensional
    low-discrepancy sequence; cost is N (d + 2) model evaluations.
    """
    if n <= 0 or n & (n - 1):
        raise ValueError("sample count must be a power of two")
    d = len(distributions)
    names = list(names) if names is not None else [f"x{i}" for i in range(d)]
    u = qmc.Sobol(2 * d, scramble=True, seed=seed).random(n)
    A = _scale(u[:, :d], distributions)
    B = _scale(u[:, d:], distributions)
    stacked = [A, B]
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        stacked.append(ABi)
    y = np.asarray(model(np.vstack(stacked)), dtype=float)
    fA, fB = y[:n], y[n:2 * n]
    var = float(np.var(np.concatenate([fA, fB])))
    if var <= 1e-15 * max(1.0, float(np.mean(np.abs(y))) ** 2):
        return SobolResult(names, np.full(d, np.nan), var, n, False)
    S = np.empty(d)
    for i in range(d):
        fABi = y[(2 + i) * n:(3 + i) * n]
        S[i] = (var - 0.5 * np.mean((fB - fABi) ** 2)) / var
    return SobolResult(names, S, var, n, True)


def tree_model(tree, inputs, mode: str = "PI", active=None):
    """Vectorized root risk as a function of selected (leaf, attribute) inputs."""
    def f(X):
        overrides: dict = {}
        for j, (leaf, attr) in enumerate(inputs):
            overrides.setdefault(leaf, {})[attr] = X[:, j]
        return np.asarray(propagate_bottom_up(tree, mode, active, overrides).root_risk) * np.ones(len(X))

    return f
