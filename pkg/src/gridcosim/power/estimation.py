"""Linear DC measurement model, WLS state estimation and bad-data detection.

Bus injection measurements follow the load convention: a positive value is
net consumption at the bus, so an injection row is the negated sum of the
flow rows leaving the bus.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .grid import GridNetwork
from .powerflow import PowerFlowResult

INJECTION = "bus-injection-P"
FLOW = "branch-flow-P"
DEFAULT_SIGNIFICANCE = 0.05
NOISE_FRACTION = 0.01


class MeasurementError(ValueError):
    pass


class UnobservableError(ValueError):
    def __init__(self, message: str, null_direction: np.ndarray):
        super().__init__(message)
        self.null_direction = null_direction


class BddUndefined(ValueError):
    pass


@dataclass(frozen=True)
class Measurement:
    kind: str
    element: int
    value: float
    sigma: float


@dataclass
class MeasurementSet:
    entries: list[Measurement]

    def __post_init__(self):
        for m in self.entries:
            if m.kind not in (INJECTION, FLOW):
                raise MeasurementError(f"unknown measurement kind {m.kind!r}")
            if not m.sigma > 0:
                raise MeasurementError(f"non-positive sigma on {m.kind} {m.element}")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def values(self) -> np.ndarray:
        return np.array([m.value for m in self.entries], dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([m.sigma for m in self.entries], dtype=float)

    def index_of(self, kind: str, element: int) -> int:
        for i, m in enumerate(self.entries):
            if m.kind == kind and m.element == element:
                return i
        raise KeyError(f"no {kind} measurement on {element}")

    def with_values(self, values) -> "MeasurementSet":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.entries),):
            raise MeasurementError("value vector length does not match the measurement set")
        return MeasurementSet(
            [Measurement(m.kind, m.element, float(v), m.sigma) for m, v in zip(self.entries, values)]
        )

    def to_dict(self) -> list[dict]:
        return [
            {"index": i, "kind": m.kind, "element": m.element, "value": m.value, "sigma": m.sigma}
            for i, m in enumerate(self.entries)
        ]


@dataclass
class JacobianH:
    """Dense DC measurement Jacobian.

    ``matrix`` is in per unit (entries ``+-1/x``); ``mw`` converts a change
    of angles in radians to MW and is what the estimator uses.
    """

    matrix: np.ndarray
    state_buses: list[int]
    base_mva: float
    slack_bus: int
    measurements: MeasurementSet | None = None

    @property
    def mw(self) -> np.ndarray:
        return self.matrix * self.base_mva

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass
class StateEstimate:
    x_hat: np.ndarray
    z: np.ndarray
    z_hat: np.ndarray
    residual: np.ndarray
    objective: float
    threshold: float
    bdd_passed: bool
    dof: int
    H: JacobianH
    weights: np.ndarray = field(repr=False)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))


@dataclass
class BddResult:
    passed: bool
    statistic: float
    threshold: float
    flagged: int | None
    normalized_residuals: np.ndarray


def full_measurement_set(grid: GridNetwork, result: PowerFlowResult, rng=None, noise_fraction=NOISE_FRACTION) -> MeasurementSet:
    """Injection at every energized bus and flow on every energized branch.

    Values come from ``result`` (use a DC result for a model-consistent set).
    With ``rng`` Gaussian noise of ``noise_fraction`` of each meter's full
    scale is added; the full scale of a flow meter is the branch rating and
    of an injection meter the largest incident rating.
    """
    energized = set(b for b, e in zip(result.bus_ids, result.energized) if e)
    rating_at = {b.id: 0.0 for b in grid.buses}
    for br in grid.branches:
        rating_at[br.from_bus] = max(rating_at[br.from_bus], br.rating_mva)
        rating_at[br.to_bus] = max(rating_at[br.to_bus], br.rating_mva)
    entries = []
    for i, b in enumerate(result.bus_ids):
        if b not in energized:
            continue
        sigma = noise_fraction * max(rating_at[b], 1.0)
        entries.append(Measurement(INJECTION, b, float(-result.bus_p_mw[i]), sigma))
    for k, br in enumerate(grid.branches):
        if br.closed and br.from_bus in energized and br.to_bus in energized:
            sigma = noise_fraction * max(br.rating_mva, 1.0)
            entries.append(Measurement(FLOW, br.id, float(result.p_from_mw[k]), sigma))
    meas = MeasurementSet(entries)
    if rng is not None:
        noisy = meas.values + rng.normal(0.0, meas.sigmas)
        meas = meas.with_values(noisy)
    return meas


def build_dc_jacobian(grid: GridNetwork, meas: MeasurementSet, include_slack: bool = False) -> JacobianH:
    energized = grid.energized_buses()
    slack = grid.slack.id
    state = [b for b in grid.bus_ids if b in energized and (include_slack or b != slack)]
    col = {b: j for j, b in enumerate(state)}
    flow_rows: dict[int, np.ndarray] = {}
    incident: dict[int, list[tuple[int, float]]] = {b: [] for b in grid.bus_ids}

    def row_for_branch(br) -> np.ndarray:
        row = np.zeros(len(state))
        b = 1.0 / br.x
        if br.from_bus in col:
            row[col[br.from_bus]] += b
        if br.to_bus in col:
            row[col[br.to_bus]] -= b
        return row

    for br in grid.branches:
        if br.closed and br.from_bus in energized and br.to_bus in energized:
            flow_rows[br.id] = row_for_branch(br)
            incident[br.from_bus].append((br.id, 1.0))
            incident[br.to_bus].append((br.id, -1.0))

    H = np.zeros((len(meas), len(state)))
    for i, m in enumerate(meas.entries):
        if m.kind == FLOW:
            br = grid.branch(m.element)
            if not br.closed:
                raise MeasurementError(f"flow measurement {i} on open branch {br.id}")
            if br.id not in flow_rows:
                raise MeasurementError(f"flow measurement {i} on de-energized branch {br.id}")
            H[i] = flow_rows[br.id]
        else:
            if m.element not in energized:
                raise MeasurementError(f"injection measurement {i} on de-energized bus {m.element}")
            for br_id, orient in incident[m.element]:
                H[i] -= orient * flow_rows[br_id]
    return JacobianH(H, state, grid.base_mva, slack, meas)


def _chi2_threshold(dof: int, significance: float) -> float:
    return float(chi2.ppf(1.0 - significance, dof))


def wls_state_estimation(H: JacobianH, z: MeasurementSet, significance: float = DEFAULT_SIGNIFICANCE) -> StateEstimate:
    """Weighted least squares with W = diag(1/sigma^2)."""
    Hm = H.mw
    zv = z.values
    w = 1.0 / z.sigmas**2
    sw = np.sqrt(w)
    A = Hm * sw[:, None]
    m, n = Hm.shape
    if n == 0:
        raise UnobservableError("no state variables", np.zeros(0))
    _, svals, vt = np.linalg.svd(A, full_matrices=True)
    tol = svals.max() * max(A.shape) * np.finfo(float).eps if svals.size else 0.0
    rank = int(np.sum(svals > tol))
    if rank < n:
        raise UnobservableError(f"measurement set is unobservable (rank {rank} < {n})", vt[-1])
    x, *_ = np.linalg.lstsq(A, sw * zv, rcond=None)
    # one refinement step tightens the normal-equation gradient
    r = zv - Hm @ x
    dx, *_ = np.linalg.lstsq(A, sw * r, rcond=None)
    x = x + dx
    z_hat = Hm @ x
    r = zv - z_hat
    J = float(np.sum(w * r * r))
    dof = m - n
    thr = _chi2_threshold(dof, significance) if dof >= 1 else float("nan")
    return StateEstimate(
        x_hat=x,
        z=zv,
        z_hat=z_hat,
        residual=r,
        objective=J,
        threshold=thr,
        bdd_passed=bool(dof >= 1 and J <= thr),
        dof=dof,
        H=H,
        weights=w,
    )


def normalized_residuals(estimate: StateEstimate) -> np.ndarray:
    Hm = estimate.H.mw
    w = estimate.weights
    G = Hm.T @ (w[:, None] * Hm)
    omega = np.diag(1.0 / w) - Hm @ np.linalg.solve(G, Hm.T)
    d = np.diag(omega).copy()
    out = np.zeros_like(d)
    ok = d > 1e-12 * (1.0 / w)
    out[ok] = np.abs(estimate.residual[ok]) / np.sqrt(d[ok])
    return out


def bad_data_detection(estimate: StateEstimate, significance: float = DEFAULT_SIGNIFICANCE) -> BddResult:
    """Chi-square test on the weighted residual sum of squares.

    On failure the measurement with the largest normalized residual is
    flagged.
    """
    if estimate.dof < 1:
        raise BddUndefined("bad-data detection needs at least one degree of freedom (m > n)")
    thr = _chi2_threshold(estimate.dof, significance)
    rn = normalized_residuals(estimate)
    passed = estimate.objective <= thr
    flagged = None if passed else int(np.argmax(rn))
    return BddResult(passed, estimate.objective, thr, flagged, rn)
