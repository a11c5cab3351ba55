"""Command line entry point: ``vpplan plan|validate|unimodal-check|compare``.

Exit codes: 0 on success, 1 on invalid input or an unsolvable scenario, 2
when a run completes but its result does not pass (non-certified plan,
empirical satisfaction below the threshold band, or a constraint statistic
that fails the unimodality check).

Scenario arguments accept a path or the name of a bundled fixture
(``exponential_rendezvous``, ``gaussian_los``). The backend comes from
``--backend`` or the ``VPPLAN_BACKEND`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from .bounds import BoundKind
from .errors import VpplanError
from .moments import DisturbanceSpec
from .scenario import FIXTURES, load_fixture, load_scenario
from .solver import PlanSolution, compare_bounds, solve_ccp
from .unimodality import UnimodalityConfig, validate_constraint_unimodality
from .validation import measure_satisfaction, sample_disturbances

log = logging.getLogger("vpplan")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
STATE_COLUMNS = ("x", "y", "vx", "vy")


class CliError(Exception):
    pass


def _scenario(arg):
    if arg in FIXTURES and not Path(arg).exists():
        return load_fixture(arg)
    if not Path(arg).is_file():
        raise CliError(f"scenario file not found: {arg}")
    return load_scenario(arg)


def _solution(path, scenario):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        sol = PlanSolution.from_dict(doc)
    except FileNotFoundError:
        raise CliError(f"solution file not found: {path}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"corrupted solution file {path}: {exc}") from None
    if sol.scenario_hash != scenario.hash():
        raise CliError(f"solution {path} was computed for a different scenario "
                       f"(hash {sol.scenario_hash[:12]} vs {scenario.hash()[:12]})")
    if sol.U.size != scenario.Nv * scenario.N * scenario.m:
        raise CliError(f"solution {path} has inputs of the wrong size")
    return sol


def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for pkg in ("artifact", "scipy", "clarabel", "cvxopt"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            pass
    return out


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _metadata(out, command, scenario, **extra):
    meta = {"command": command, "scenario": scenario.name, "scenario_hash": scenario.hash(),
            "seed": scenario.seed, "versions": _versions()}
    meta.update(extra)
    _write_json(out / f"metadata_{command}.json", meta)


def write_trajectories(path, solution):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("vehicle", "k") + STATE_COLUMNS)
        for i, traj in enumerate(np.asarray(solution.mean_states)):
            for k, x in enumerate(traj):
                w.writerow([i, k] + [repr(float(v)) for v in x])


def cmd_plan(args):
    sc = _scenario(args.scenario)
    sol = solve_ccp(sc, kind=args.bound, backend=args.backend)
    out = Path(args.out)
    _write_json(out / "solution.json", sol.to_dict())
    write_trajectories(out / "trajectories.csv", sol)
    _metadata(out, "plan", sc, bound=sol.bound.value, backend=args.backend)
    status = "certified" if sol.certified else "NOT certified"
    print(f"{sc.name}: {sol.bound.value} cost={sol.cost:.6g} iterations={sol.iterations} "
          f"slack={sol.slack_sum:.3g} {status}")
    for note in sol.notes:
        print(f"  note: {note}")
    return EXIT_OK if sol.certified else EXIT_FAIL


def cmd_validate(args):
    sc = _scenario(args.scenario)
    sol = _solution(args.solution, sc)
    seed = sc.seed if args.seed is None else args.seed
    batch = sample_disturbances(sc.disturbance, args.samples, seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = measure_satisfaction(sol, sc, batch)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    _write_json(out / "satisfaction.json", rep.to_dict())
    _metadata(out, "validate", sc, samples=args.samples, sample_seed=seed)
    for name, p in rep.joint.items():
        print(f"{name}: {p:.4f} (required {rep.required[name]:.4f}) {'pass' if rep.passed[name] else 'FAIL'}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_unimodal_check(args):
    sc = _scenario(args.scenario)
    sol = _solution(args.solution, sc)
    seed = sc.seed if args.seed is None else args.seed
    cfg = UnimodalityConfig(xi=args.xi)
    spec = None
    if args.disturbance:
        d = json.loads(Path(args.disturbance).read_text(encoding="utf-8"))
        spec = DisturbanceSpec.from_family(d["family"], d.get("params", {}), sc.Nv, sc.N, sc.n)
    res = validate_constraint_unimodality(sol, sc, args.samples, seed, cfg, spec=spec)
    failed = [k for k, ok in res.items() if not ok]
    report = {"samples": args.samples, "seed": seed, "xi": cfg.xi_for(args.samples),
              "all_unimodal": not failed,
              "results": {":".join(map(str, k)): bool(v) for k, v in res.items()}}
    out = Path(args.out)
    _write_json(out / "unimodality.json", report)
    _metadata(out, "unimodal-check", sc, samples=args.samples, sample_seed=seed)
    print(f"{len(res) - len(failed)}/{len(res)} constraint statistics pass the unimodality check")
    for k in failed:
        print(f"  not unimodal: {':'.join(map(str, k))}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_compare(args):
    sc = _scenario(args.scenario)
    cmp = compare_bounds(sc, backend=args.backend)
    seed = sc.seed if args.seed is None else args.seed
    batch = sample_disturbances(sc.disturbance, args.samples, seed) if sc.disturbance.samplable else None
    groups = [g for g, present in (("target", sc.targets), ("collision", sc.pairs),
                                   ("obstacle", sc.obstacles)) if present]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for kind in (BoundKind.VP, BoundKind.CANTELLI):
        sol = cmp.solutions.get(kind)
        row = {"method": kind.value}
        if sol is None:
            row.update(cost="", iterations="", slack="", certified=False, error=cmp.errors.get(kind, ""))
            row.update({f"sat_{g}": "" for g in groups})
        else:
            row.update(cost=repr(sol.cost), iterations=sol.iterations, slack=repr(sol.slack_sum),
                       certified=sol.certified, error="")
            rep = measure_satisfaction(sol, sc, batch) if batch is not None else None
            row.update({f"sat_{g}": (repr(rep.joint[g]) if rep else "") for g in groups})
            write_trajectories(out / f"trajectories_{kind.value}.csv", sol)
        rows.append(row)
    fields = ["method", "cost", "iterations", "slack", "certified"] + [f"sat_{g}" for g in groups] + ["error"]
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)
    _metadata(out, "compare", sc, samples=args.samples, sample_seed=seed, backend=args.backend)
    for row in rows:
        desc = f"cost={row['cost']}" if row["cost"] != "" else f"failed ({row['error']})"
        print(f"{row['method']}: {desc} certified={row['certified']}")
    if cmp.cost_delta is not None:
        print(f"cost delta (cantelli - vp): {cmp.cost_delta:.6g}")
    return EXIT_OK if cmp.solutions else EXIT_ERROR


def build_parser():
    p = argparse.ArgumentParser(prog="vpplan", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="solve a scenario and write the result bundle")
    sp.add_argument("scenario")
    sp.add_argument("--bound", choices=("vp", "cantelli"), default=None,
                    help="tail bound (default: the scenario's)")
    sp.add_argument("--out", default="out")
    sp.add_argument("--backend", default=None)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("validate", help="Monte Carlo constraint satisfaction of a solved plan")
    sp.add_argument("scenario")
    sp.add_argument("solution")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("unimodal-check", help="ECDF unimodality check of every constraint statistic")
    sp.add_argument("scenario")
    sp.add_argument("solution")
    sp.add_argument("--samples", type=int, default=50_000)
    sp.add_argument("--xi", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--disturbance", default=None,
                    help="JSON {family, params} to sample instead of the scenario's disturbance")
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_unimodal_check)

    sp = sub.add_parser("compare", help="solve under both tail bounds and tabulate")
    sp.add_argument("scenario")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", default="out")
    sp.add_argument("--backend", default=None)
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means "ran but did not pass"
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, VpplanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
