"""Command line front end.

One JSON config per run; group elements may be written either as full
d x d matrices or as exponential coordinates (an n-vector expanded
through the group exponential at load time).  Unknown keys anywhere in
the config are rejected.

Exit codes: 0 ok, 1 usage or config error, 2 validation failure,
3 numeric blow-up, 4 no convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import algebra, direct, dynamics, groups, pmp, shooting
from .errors import AngleOutOfRange, NoConvergence, NonFinite, SingularRegularity


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


_SCHEMA = {
    "algebra": {"kind", "inertia", "n", "m", "structure_constants", "file"},
    "cost": {"kind", "R"},
    "problem": {"x0", "xT", "y0", "yT", "T", "steps"},
    "solver": {"tol", "max_iter", "fd_step", "guess", "seed"},
    "oracle": {"segments", "penalty_weight", "max_outer", "grad_step", "lr",
               "momentum", "lr_grow", "max_halvings", "grad_tol", "steps_per_segment"},
    "control": None,
    "costate0": {"mu0", "xi0"},
    "output": {"path", "format"},
}

_SOLVER_DEFAULTS = {"tol": 1e-8, "max_iter": 200, "fd_step": 1e-6, "guess": None, "seed": 0}
_OUTPUT_DEFAULTS = {"path": "aoc_out", "format": "csv"}


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(data) - set(_SCHEMA)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for section, keys in _SCHEMA.items():
        if keys is None or section not in data:
            continue
        if not isinstance(data[section], dict):
            raise UsageError(f"config section '{section}' must be an object")
        bad = set(data[section]) - keys
        if bad:
            raise UsageError(f"unknown keys in config section '{section}': {sorted(bad)}")
    if "algebra" not in data:
        raise UsageError("config needs an 'algebra' section")
    data.setdefault("cost", {"kind": "min_acc"})
    data["solver"] = {**_SOLVER_DEFAULTS, **data.get("solver", {})}
    data["output"] = {**_OUTPUT_DEFAULTS, **data.get("output", {})}
    data.setdefault("control", "zero")
    return data


def build_model(config):
    """Model plus group from the algebra section.  Raises UsageError on
    config problems; returns the validation reports for the caller to gate."""
    section = config["algebra"]
    kind = section.get("kind")
    rep = None
    if kind == "so3":
        diag = section.get("inertia", [1.0, 1.0, 1.0])
        diag = np.asarray(diag, dtype=float)
        if diag.ndim == 2:
            diag = np.diag(diag)
        try:
            model = algebra.so3_model(tuple(diag), m=int(section.get("m", 3)))
        except ValueError as e:
            raise UsageError(str(e))
        gm = groups.so3_group(model)
    elif kind == "abelian":
        if "n" not in section:
            raise UsageError("abelian algebra needs 'n'")
        inertia = section.get("inertia")
        try:
            model = algebra.abelian_model(int(section["n"]), m=section.get("m"), inertia=inertia)
        except ValueError as e:
            raise UsageError(str(e))
        gm = groups.abelian_group(model)
    elif kind == "custom":
        if "file" not in section:
            raise UsageError("custom algebra needs 'file'")
        try:
            model, rep = algebra.load_model(section["file"])
        except FileNotFoundError:
            raise UsageError(f"model file not found: {section['file']}")
        except (ValueError, KeyError) as e:
            raise UsageError(f"bad model file: {e}")
        if rep is None:
            gm = None
        else:
            gm = groups.generic_group(model, rep["basis_matrices"])
    else:
        raise UsageError(f"algebra kind must be so3, abelian or custom, got {kind!r}")
    return model, gm


def build_cost(config, model):
    section = config["cost"]
    kind = section.get("kind", "min_acc")
    if kind == "min_acc":
        return pmp.min_acc_cost(model)
    if kind == "quadratic":
        if "R" not in section:
            raise UsageError("quadratic cost needs 'R'")
        try:
            return pmp.quadratic_cost(model, np.asarray(section["R"], dtype=float))
        except ValueError as e:
            raise UsageError(f"bad quadratic weight: {e}")
    raise UsageError(f"cost kind must be min_acc or quadratic, got {kind!r}")


def _group_element(gm, raw, what):
    arr = np.asarray(raw, dtype=float)
    d, n = gm.rep_dim, gm.algebra.n
    if arr.shape == (d, d):
        return arr
    if arr.shape == (n,):
        return groups.exp_map(gm, arr)
    raise UsageError(f"{what} must be a {d}x{d} matrix or an {n}-vector of exp coordinates")


def build_problem(config, model, gm):
    if "problem" not in config:
        raise UsageError("this command needs a 'problem' section")
    section = config["problem"]
    for key in ("x0", "xT", "y0", "yT", "T", "steps"):
        if key not in section:
            raise UsageError(f"problem section missing '{key}'")
    y0 = np.asarray(section["y0"], dtype=float)
    yT = np.asarray(section["yT"], dtype=float)
    if y0.shape != (model.n,) or yT.shape != (model.n,):
        raise UsageError(f"y0 and yT must have {model.n} components")
    try:
        return shooting.BoundaryProblem(
            x0=_group_element(gm, section["x0"], "x0"),
            xT=_group_element(gm, section["xT"], "xT"),
            y0=y0, yT=yT, T=float(section["T"]), steps=int(section["steps"]))
    except ValueError as e:
        raise UsageError(str(e))


def build_control(config, model):
    section = config["control"]
    if section == "zero":
        return dynamics.zero_control(model)
    if isinstance(section, dict) and set(section) <= {"times", "values"}:
        times = np.asarray(section.get("times", []), dtype=float)
        values = np.asarray(section.get("values", []), dtype=float)
        if times.ndim != 1 or values.shape != (len(times), model.m) or len(times) < 2:
            raise UsageError("control samples need matching 'times' (k) and 'values' (k x m), k >= 2")

        def u(t):
            return np.array([np.interp(t, times, values[:, a]) for a in range(model.m)])

        return u
    raise UsageError("control must be \"zero\" or an object with 'times' and 'values'")


def _out_base(config, args):
    path = args.out if args.out else config["output"]["path"]
    p = Path(path)
    if p.suffix in (".csv", ".json"):
        p = p.with_suffix("")
    return p


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_validate(config, args):
    model, gm = build_model(config)
    report = algebra.validate_model(model)
    lines = report.lines()
    ok = report.passed
    if gm is not None:
        greport = groups.validate_group(gm)
        lines += greport.lines()
        ok = ok and greport.passed
    print("\n".join(lines))
    print("overall:", "PASS" if ok else "FAIL")
    return 0 if ok else 2


def _require_valid(model, gm):
    report = algebra.validate_model(model)
    if not report.passed:
        print("model validation failed: " + ", ".join(report.failures()), file=sys.stderr)
        return False
    if gm is not None and not groups.validate_group(gm).passed:
        print("group representation validation failed", file=sys.stderr)
        return False
    return True


def _need_group(gm):
    if gm is None:
        raise UsageError("this command needs a matrix representation "
                         "(custom models must carry rep_dim/basis_matrices)")


def cmd_simulate(config, args):
    model, gm = build_model(config)
    _need_group(gm)
    if not _require_valid(model, gm):
        return 2
    problem = build_problem(config, model, gm)
    u = build_control(config, model)
    traj = dynamics.simulate(model, gm, dynamics.State(problem.x0, problem.y0),
                             u, problem.T, problem.steps)
    base = _out_base(config, args)
    dynamics.write_trajectory_csv(traj, base.with_suffix(".csv"), model, gm)
    drift = dynamics.energy_drift(model, traj)
    print(f"wrote {base.with_suffix('.csv')}")
    print(f"kinetic energy drift: {drift:.6e}")
    return 0


def cmd_extremal(config, args):
    model, gm = build_model(config)
    _need_group(gm)
    if not _require_valid(model, gm):
        return 2
    problem = build_problem(config, model, gm)
    cost = build_cost(config, model)
    seed_cfg = config.get("costate0", {})
    mu0 = args.mu0 if args.mu0 is not None else seed_cfg.get("mu0")
    xi0 = args.xi0 if args.xi0 is not None else seed_cfg.get("xi0")
    if mu0 is None or xi0 is None:
        raise UsageError("extremal needs mu0 and xi0 (flags --mu0/--xi0 or config costate0)")
    mu0 = np.asarray(mu0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    if mu0.shape != (model.n,) or xi0.shape != (model.n,):
        raise UsageError(f"mu0 and xi0 must have {model.n} components")
    a0 = pmp.ExtremalPoint(dynamics.State(problem.x0, problem.y0),
                           pmp.Costate(mu0, xi0), np.zeros(model.m))
    traj = pmp.flow_extremal(model, gm, cost, a0, problem.T, problem.steps)
    base = _out_base(config, args)
    dynamics.write_trajectory_csv(traj, base.with_suffix(".csv"), model, gm)
    print(f"wrote {base.with_suffix('.csv')}")
    print(f"H drift: {np.abs(traj.hams - traj.hams[0]).max():.6e}")
    return 0


def _oracle_config(config):
    section = dict(config.get("oracle", {}))
    section.setdefault("segments", 50)
    try:
        return direct.TranscriptionConfig(**section)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad oracle section: {e}")


def cmd_shoot(config, args):
    model, gm = build_model(config)
    _need_group(gm)
    if not _require_valid(model, gm):
        return 2
    problem = build_problem(config, model, gm)
    cost = build_cost(config, model)
    sol = config["solver"]
    guess = sol.get("guess")
    if guess is not None:
        guess = np.asarray(guess, dtype=float)
        if guess.shape != (2 * model.n,):
            raise UsageError(f"solver guess must have {2 * model.n} components")
        guess = (guess[: model.n], guess[model.n:])
    result = shooting.solve_shooting(model, gm, cost, problem, initial_guess=guess,
                                     tol=float(sol["tol"]), max_iter=int(sol["max_iter"]),
                                     fd_step=float(sol["fd_step"]))
    base = _out_base(config, args)
    payload = {
        "mu0": list(result.mu0),
        "xi0": list(result.xi0),
        "residual_norm": result.residual_norm,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    if result.trajectory is not None:
        payload["cost"] = pmp.running_cost(cost, result.trajectory)
        dynamics.write_trajectory_csv(result.trajectory, base.with_suffix(".csv"), model, gm)
    _write_json(base.with_suffix(".json"), payload)
    print(f"wrote {base.with_suffix('.json')}")
    print(f"converged: {result.converged}  residual: {result.residual_norm:.3e}")
    return 0 if result.converged else 4


def cmd_compare(config, args):
    model, gm = build_model(config)
    _need_group(gm)
    if not _require_valid(model, gm):
        return 2
    problem = build_problem(config, model, gm)
    cost = build_cost(config, model)
    sol = config["solver"]
    indirect = shooting.solve_shooting(model, gm, cost, problem,
                                       tol=float(sol["tol"]), max_iter=int(sol["max_iter"]),
                                       fd_step=float(sol["fd_step"]))
    if not indirect.converged or indirect.trajectory is None:
        print("indirect solver did not converge; no comparison", file=sys.stderr)
        return 4
    indirect_cost = pmp.running_cost(cost, indirect.trajectory)

    oracle_cfg = _oracle_config(config)
    direct_res = direct.optimize_direct(model, gm, cost, problem, oracle_cfg)
    direct_cost = direct_res.running_cost

    if abs(indirect_cost) > 1e-12:
        gap = (direct_cost - indirect_cost) / indirect_cost
    else:
        gap = direct_cost - indirect_cost

    # compare controls at the direct segment midpoints
    N = oracle_cfg.segments
    mids = (np.arange(N) + 0.5) * problem.T / N
    idx = np.clip(np.round(mids / problem.T * (len(indirect.trajectory) - 1)).astype(int),
                  0, len(indirect.trajectory) - 1)
    sup = float(np.abs(direct_res.U - indirect.trajectory.us[idx]).max())

    payload = {
        "indirect_cost": indirect_cost,
        "direct_cost": direct_cost,
        "gap": gap,
        "control_sup_distance": sup,
        "shooting_residual": indirect.residual_norm,
        "direct_summary": {
            "objective": direct_res.objective,
            "boundary_error": direct_res.boundary_error,
            "iterations": direct_res.iterations,
        },
    }
    base = _out_base(config, args)
    _write_json(base.with_suffix(".json"), payload)
    print(f"wrote {base.with_suffix('.json')}")
    print(f"indirect {indirect_cost:.6f}  direct {direct_cost:.6f}  gap {gap:+.4%}")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "extremal": cmd_extremal,
    "shoot": cmd_shoot,
    "compare": cmd_compare,
}


def _parse_vector(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}")


def main(argv=None) -> int:
    parser = _Parser(prog="aoc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run config (JSON)")
    parser.add_argument("--out", default=None, help="output base path (overrides config)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized fallbacks (overrides config)")
    parser.add_argument("--dump-config", action="store_true",
                        help="print the fully resolved config and exit")
    parser.add_argument("--mu0", default=None, help="initial mu costate, comma separated")
    parser.add_argument("--xi0", default=None, help="initial xi costate, comma separated")
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
        if args.seed is not None:
            config["solver"]["seed"] = int(args.seed)
        if args.out is not None:
            config["output"]["path"] = str(_out_base(config, args))
        if args.mu0 is not None:
            args.mu0 = _parse_vector(args.mu0)
            config.setdefault("costate0", {})["mu0"] = args.mu0
        if args.xi0 is not None:
            args.xi0 = _parse_vector(args.xi0)
            config.setdefault("costate0", {})["xi0"] = args.xi0
        if args.dump_config:
            print(json.dumps(config, indent=2, sort_keys=True))
            return 0
        return _COMMANDS[args.command](config, args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NonFinite as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (NoConvergence, SingularRegularity, AngleOutOfRange) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
