"""Stealthy false-data injection against DC state estimation.

An attack ``a = H c`` shifts the estimate by ``c`` and leaves the residual
untouched, so a residual-based detector cannot see it. The attacker wants
the sparsest such ``a`` that moves one measurement by a requested amount
while a protected set of meters stays unaltered.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..power.estimation import JacobianH, MeasurementSet, wls_state_estimation

EXACT_MAX_STATES = 20
MAX_SUPPORT = 3
ZERO_TOL = 1e-9
STEALTH_TOL = 1e-9


class FdiInfeasible(ValueError):
    """The protected meters pin the target; ``blocking`` names them."""

    def __init__(self, message: str, blocking: list[int]):
        super().__init__(message)
        self.blocking = blocking


@dataclass(frozen=True)
class FdiTarget:
    index: int
    delta: float

    def __post_init__(self):
        if self.delta == 0:
            raise ValueError("target delta must be non-zero")


@dataclass(frozen=True)
class ProtectedSet:
    indices: frozenset = field(default_factory=frozenset)

    def __init__(self, indices=()):
        object.__setattr__(self, "indices", frozenset(int(i) for i in indices))

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class AttackVector:
    a: np.ndarray
    c: np.ndarray
    target: FdiTarget
    exact: bool = True

    @property
    def alpha(self) -> int:
        return int(np.count_nonzero(self.a))

    @property
    def support(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.a)]

    @property
    def sparse(self) -> dict[int, float]:
        return {i: float(self.a[i]) for i in self.support}

    def to_dict(self) -> dict:
        return {
            "target": {"index": self.target.index, "delta": self.target.delta},
            "alpha": self.alpha,
            "exact": self.exact,
            "a": {str(k): v for k, v in self.sparse.items()},
            "c": [float(v) for v in self.c],
        }

    @classmethod
    def zero(cls, m: int, n: int, target: FdiTarget) -> "AttackVector":
        return cls(np.zeros(m), np.zeros(n), target)


@dataclass
class StealthReport:
    stealthy: bool
    residual_norm: float
    attacked_residual_norm: float
    state_shift: np.ndarray


def _blocking_rows(Hm: np.ndarray, target: int, protected: list[int]) -> list[int]:
    """Protected rows whose span contains the target row (empty if feasible)."""
    if not protected:
        return [] if np.any(Hm[target] != 0) else [target]
    P = Hm[protected]
    lam, *_ = np.linalg.lstsq(P.T, Hm[target], rcond=None)
    resid = np.linalg.norm(P.T @ lam - Hm[target])
    if resid > 1e-9 * max(1.0, np.linalg.norm(Hm[target])):
        return []
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    return [protected[k] for k in range(len(protected)) if abs(lam[k]) > 1e-9 * max(scale, 1.0)]


def _supports_all(n: int, k: int) -> np.ndarray:
    rows = []
    for size in range(1, k + 1):
        for combo in itertools.combinations(range(n), size):
            rows.append(list(combo) + [-1] * (k - size))
    return np.array(rows, dtype=np.int64).reshape(-1, k)


def _supports_local(Hm: np.ndarray) -> np.ndarray:
    """Singles plus pairs/triples of columns that share a measurement row."""
    n = Hm.shape[1]
    nz = np.abs(Hm) > 0
    neigh = [sorted(set(np.flatnonzero(nz[np.flatnonzero(nz[:, j])].any(axis=0))) - {j}) for j in range(n)]
    seen = set()
    rows = []
    for j in range(n):
        for combo in [(j,)] + [tuple(sorted((j, q))) for q in neigh[j]] + [
            tuple(sorted((j, q, r))) for q, r in itertools.combinations(neigh[j], 2)
        ]:
            if combo not in seen:
                seen.add(combo)
                rows.append(list(combo) + [-1] * (3 - len(combo)))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _dense_solve(Hm: np.ndarray, target: int, delta: float, protected: list[int]) -> np.ndarray:
    """Minimum-norm ``c`` meeting the target and protection constraints."""
    rows = [target] + protected
    b = np.zeros(len(rows))
    b[0] = delta
    c, *_ = np.linalg.lstsq(Hm[rows], b, rcond=None)
    return c


def build_fdi_vector(
    H: JacobianH,
    target: FdiTarget,
    protected: ProtectedSet | None = None,
    unit: bool = False,
    exact_max_states: int = EXACT_MAX_STATES,
) -> AttackVector:
    """Sparsest stealthy attack with ``a[target] = delta`` and ``a[P] = 0``.

    For up to ``exact_max_states`` state variables every state support of
    size one to three is searched exhaustively; larger systems use supports
    of columns that share a measurement. If no small support is feasible
    the minimum-norm dense solution is returned with ``exact=False``.
    With ``unit=True`` the target delta is fixed to 1.
    """
    protected = protected or ProtectedSet()
    Hm = H.mw
    m, n = Hm.shape
    if not 0 <= target.index < m:
        raise IndexError(f"target index {target.index} outside 0..{m - 1}")
    if target.index in protected:
        raise ValueError("the target measurement cannot be protected")
    for k in protected.indices:
        if not 0 <= k < m:
            raise IndexError(f"protected index {k} outside 0..{m - 1}")
    delta = 1.0 if unit else float(target.delta)
    if unit:
        target = FdiTarget(target.index, 1.0)
    prot = sorted(protected.indices)
    blocking = _blocking_rows(Hm, target.index, prot)
    if blocking:
        raise FdiInfeasible(
            f"measurement {target.index} is fixed by protected measurements {blocking}", blocking
        )

    mask = np.zeros(m, dtype=np.uint8)
    mask[prot] = 1
    supports = _supports_all(n, MAX_SUPPORT) if n <= exact_max_states else _supports_local(Hm)
    alpha, _, c = kernels.fdi_support_search(Hm, target.index, delta, mask, supports, ZERO_TOL)
    exact = alpha >= 0 and n <= exact_max_states
    if alpha < 0:
        c = _dense_solve(Hm, target.index, delta, prot)
    return _finalize(Hm, c, target, delta, prot, exact)


def _finalize(Hm, c, target, delta, prot, exact) -> AttackVector:
    c = np.asarray(c, dtype=float).copy()
    hit = Hm[target.index] @ c
    c *= delta / hit
    a = Hm @ c
    a[np.abs(a) <= ZERO_TOL * max(1.0, abs(delta))] = 0.0
    a[prot] = 0.0
    a[target.index] = delta
    return AttackVector(a, c, target, exact)


def apply_fdi(z: MeasurementSet, attack: AttackVector) -> MeasurementSet:
    """``z + a`` touching only the attacked entries."""
    if len(attack.a) != len(z):
        raise ValueError("attack vector and measurement set differ in length")
    values = z.values
    idx = np.flatnonzero(attack.a)
    values[idx] = values[idx] + attack.a[idx]
    return z.with_values(values)


def verify_stealth(H: JacobianH, z: MeasurementSet, z_a: MeasurementSet) -> StealthReport:
    """Compare residual norms of fresh estimates with and without the attack."""
    est = wls_state_estimation(H, z)
    est_a = wls_state_estimation(H, z_a)
    r = np.linalg.norm(est.residual)
    ra = np.linalg.norm(est_a.residual)
    return StealthReport(bool(abs(ra - r) <= STEALTH_TOL), float(r), float(ra), est_a.x_hat - est.x_hat)
