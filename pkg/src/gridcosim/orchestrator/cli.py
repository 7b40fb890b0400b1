"""Command-line entry points: simulate | fdi | game | dss | export | calibrate | validate.

Exit codes: 0 success, 2 usage or validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..comms.calibrate import FIELD_RTT_TARGET, calibrate
from ..dss.adt import AdtError, bundled_adt, load_adt
from ..dss.reports import write_reports
from ..game.engine import GameConfig, run_game
from ..gridattack.fdi import FdiInfeasible, FdiTarget, ProtectedSet, apply_fdi, build_fdi_vector, verify_stealth
from ..power.estimation import build_dc_jacobian, full_measurement_set
from ..power.topology import solve_with_fallback
from .loop import _MEAS_KIND, run_closed_loop, substream
from .scenario import FORMATS, ScenarioValidationError, load_scenario, validate_scenario

OUT_ENV = "GRIDCOSIM_OUT"
DEFAULT_OUT = "gridcosim-out"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class _Invalid(Exception):
    def __init__(self, errors):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


def _out(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scenario(args):
    if not args.scenario:
        raise _Invalid("--scenario is required")
    sc = load_scenario(args.scenario, seed=args.seed)
    if getattr(args, "format", None):
        sc.dataset.formats = list(dict.fromkeys(args.format))
    return sc


def _emit(doc) -> None:
    print(json.dumps(doc, indent=1, sort_keys=True, default=str))


def cmd_simulate(args) -> None:
    sc = _scenario(args)
    rep = run_closed_loop(sc, _out(args))
    _emit(rep.summary())
    print("timings " + json.dumps({k: round(v, 3) for k, v in sorted(rep.timings.items())}), file=sys.stderr)


def cmd_export(args) -> None:
    sc = _scenario(args)
    rep = run_closed_loop(sc, _out(args))
    _emit({k: v for k, v in rep.files.items() if k.startswith("dataset_")})


def cmd_fdi(args) -> None:
    """Stealthy vector for the scenario target on the nominal grid, checked against the estimator."""
    sc = _scenario(args)
    att = sc.attacker
    if att.target is None or not att.delta_mw:
        raise _Invalid("$.attacker: fdi needs target and delta_mw")
    grid = sc.grid
    res = solve_with_fallback(grid)
    z = full_measurement_set(grid, res, substream(sc.seed, "measurement"), sc.operator.noise_fraction)
    H = build_dc_jacobian(grid, z)
    kind, el = _MEAS_KIND[att.target["kind"]], att.target["element"]
    idx = z.index_of(kind, el)
    owned = set(att.compromised)
    reporter = {}
    for dev, dps in sc.datapoints.items():
        for dp in dps:
            if dp.kind in _MEAS_KIND:
                reporter[(_MEAS_KIND[dp.kind], dp.element)] = dev
    protected = ProtectedSet(i for i, m in enumerate(z.entries) if reporter.get((m.kind, m.element)) not in owned)
    out = _out(args)
    try:
        vec = build_fdi_vector(H, FdiTarget(idx, float(att.delta_mw)), protected)
    except FdiInfeasible as e:
        doc = {"feasible": False, "reason": str(e), "blocking": [z.entries[i].__dict__ for i in e.blocking]}
    else:
        st = verify_stealth(H, z, apply_fdi(z, vec))
        doc = {
            "feasible": True,
            "vector": vec.to_dict(),
            "support": [dict(z.entries[i].__dict__, a=a) for i, a in vec.sparse.items()],
            "stealthy": st.stealthy,
            "residual_norm": st.residual_norm,
            "attacked_residual_norm": st.attacked_residual_norm,
        }
    (out / "fdi.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _emit(doc)


def cmd_game(args) -> None:
    sc = _scenario(args)
    if sc.it is None:
        raise _Invalid("$.it: game needs an it scenario")
    doc = dict(sc.game or {})
    doc["seed"] = sc.seed if args.seed is not None or "seed" not in doc else doc["seed"]
    if args.rounds is not None:
        doc["rounds"] = args.rounds
    try:
        cfg = GameConfig.from_dict(doc)
    except (TypeError, ValueError) as e:
        raise _Invalid(f"$.game: {e}") from e
    res = run_game(cfg, sc.it)
    out = _out(args)
    fmt = (args.format or ["jsonl"])[-1]
    path = out / ("rounds.csv" if fmt == "csv" else "rounds.jsonl")
    res.to_csv(path) if fmt == "csv" else res.to_jsonl(path)
    outcomes = [r.outcome for r in res.records]
    _emit({"rounds": len(res.records), "outcomes": {o: outcomes.count(o) for o in sorted(set(outcomes))}, "file": str(path)})


def cmd_dss(args) -> None:
    tree = bundled_adt() if args.tree in (None, "bundled") else load_adt(args.tree)
    paths = write_reports(tree, _out(args), mode=args.mode)
    _emit({k: str(v) for k, v in paths.items()})


def cmd_calibrate(args) -> None:
    try:
        cal = calibrate(host_rtt=args.target_rtt, field_rtt=args.field_rtt)
    except ValueError as e:
        raise _Invalid(f"--target-rtt: {e}") from e
    doc = cal.to_dict()
    if args.out or os.environ.get(OUT_ENV):
        (_out(args) / "calibration.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _emit(doc)


def cmd_validate(args) -> None:
    if not args.scenario:
        raise _Invalid("--scenario is required")
    errors = validate_scenario(args.scenario)
    if errors:
        raise _Invalid(errors)
    _emit({"valid": True, "scenario": args.scenario})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridcosim", description="Smart-grid cyber attack/defense co-simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", metavar="PATH", help="scenario JSON file")
            sp.add_argument("--seed", type=int, metavar="N", help="override the scenario seed")
        sp.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        return sp

    for name, fn, help_ in (
        ("simulate", cmd_simulate, "run the closed operating loop"),
        ("export", cmd_export, "run the loop and report the dataset files"),
    ):
        sp = common(sub.add_parser(name, help=help_))
        sp.add_argument("--format", action="append", choices=sorted(FORMATS), help="dataset format (repeatable)")
        sp.set_defaults(fn=fn)
    sp = common(sub.add_parser("fdi", help="build and check a stealthy injection vector"))
    sp.set_defaults(fn=cmd_fdi)
    sp = common(sub.add_parser("game", help="play the attacker/defender game"))
    sp.add_argument("--rounds", type=int, metavar="N")
    sp.add_argument("--format", action="append", choices=["jsonl", "csv"])
    sp.set_defaults(fn=cmd_game)
    sp = common(sub.add_parser("dss", help="attack-defense tree risk reports"), scenario=False)
    sp.add_argument("--tree", metavar="PATH", default="bundled")
    sp.add_argument("--mode", choices=["PI", "PI_over_C"], default="PI")
    sp.set_defaults(fn=cmd_dss)
    sp = common(sub.add_parser("calibrate", help="fit device processing delays to ping RTT targets"), scenario=False)
    sp.add_argument("--target-rtt", type=float, required=True, metavar="SECONDS", help="host-to-host RTT")
    sp.add_argument("--field-rtt", type=float, default=FIELD_RTT_TARGET, metavar="SECONDS", help="control-centre-to-RTU RTT")
    sp.set_defaults(fn=cmd_calibrate)
    sp = sub.add_parser("validate", help="check a scenario file")
    sp.add_argument("--scenario", metavar="PATH")
    sp.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (_Invalid, ScenarioValidationError, AdtError) as e:
        for msg in e.errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to one exit code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
