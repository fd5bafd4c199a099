"""cascade-lab command line.

    cascade-lab toy run|hetero        toy-model integrations
    cascade-lab lambda build|verify|sums
    cascade-lab cascade search|report
    cascade-lab galerkin compare|norms
    cascade-lab nf check
    cascade-lab sweep                  Cartesian grids over a cell command

Every command writes into --out (default: current directory) and prints a
short summary.  Exit status: 0 on success, 1 when a search fails or a
verification does not pass, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import BACKEND, SCHEMA_VERSION, __version__
from .config import ExperimentConfig, worker_count
from .errors import CascadeLabError, PreconditionError, SearchFailed
from .io import read_json, write_csv, write_gnuplot, write_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _span(text: str):
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:END, got {text!r}")


def _csv_floats(text: str):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


# flag dest -> (section, key)
OVERRIDES = {
    "toy": {"N": "n_modes", "delta": "delta", "sigma": "sigma", "nu": "nu", "j": "j", "samples": "samples",
            "perturbation": "perturbation", "seed": "seed"},
    "cascade": {"N": ("toy", "n_modes"), "delta": ("toy", "delta"), "sigma": ("toy", "sigma"),
                "nu": ("toy", "nu"), "entry_depth": "entry_depth", "samples": "samples"},
    "lambda": {"N": "n_generations", "gen_size": "gen_size", "radius": "radius", "seed": "seed",
               "profile": "profile", "s": "s"},
    "galerkin": {"N": "n_generations", "lambdas": "lambdas", "samples": "samples", "flow": "flow",
                 "seed": "seed", "s": "s"},
    "nf": {"amplitudes": "amplitudes", "seed": "seed"},
    "sweep": {"threads": "threads"},
}


def _apply(cfg: ExperimentConfig, group: str, args):
    for dest, target in OVERRIDES.get(group, {}).items():
        v = getattr(args, dest, None)
        if v is None:
            continue
        section, key = target if isinstance(target, tuple) else (group, target)
        cfg.values[section][key] = v
    span = getattr(args, "t", None)
    if span is not None:
        cfg.values["toy"]["t_start"], cfg.values["toy"]["t_end"] = span


# ---------------------------------------------------------------- toy

def cmd_toy_hetero(cfg, out: Path):
    from .integrator import IntegratorConfig, integrate
    from .toy import ExactOrbit, OrbitKind, exact_orbit_point, toy_field
    t = cfg.section("toy")
    orbit = ExactOrbit(OrbitKind.HETERO_PLUS, t["j"], t["n_modes"])
    ts = np.linspace(t["t_start"], t["t_end"], t["samples"])
    y0 = exact_orbit_point(orbit, ts[0]).modes
    traj = integrate(toy_field, y0, ts[0], ts[-1], IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14))
    rows, worst = [], 0.0
    j = t["j"] - 1
    for s, y in zip(ts, traj.sample(ts)):
        exact = exact_orbit_point(orbit, s).modes
        dev = float(np.linalg.norm(y - exact))
        worst = max(worst, dev)
        rows.append([s, abs(exact[j]), abs(exact[j + 1]), abs(y[j]), abs(y[j + 1]), dev])
    write_csv(out / "hetero.csv", ["t", "exact_bj", "exact_bj1", "integrated_bj", "integrated_bj1",
                                   "l2_deviation"], rows, "hetero")
    write_gnuplot(out / "hetero.gp", "hetero.csv", [2, 3, 4, 5],
                  ["exact |b_j|", "exact |b_j+1|", "integrated |b_j|", "integrated |b_j+1|"], "t", "modulus")
    print(f"max l2 deviation {worst:.3e}")
    return EXIT_OK


def cmd_toy_run(cfg, out: Path):
    from .cascade import mode_series
    from .integrator import integrate
    from .toy import ExactOrbit, OrbitKind, exact_orbit_point, toy_field, toy_hamiltonian, toy_mass
    t = cfg.section("toy")
    rng = np.random.default_rng(t["seed"])
    y0 = exact_orbit_point(ExactOrbit(OrbitKind.PERIODIC, t["j"], t["n_modes"]), 0.0).modes.copy()
    y0 += t["perturbation"] * (rng.normal(size=t["n_modes"]) + 1j * rng.normal(size=t["n_modes"]))
    traj = integrate(toy_field, y0, t["t_start"], t["t_end"], cfg.cascade_params().integrator)
    rows = mode_series(traj, t["samples"])
    n = t["n_modes"]
    write_csv(out / "toy_run.csv", ["t"] + [f"|b_{k}|" for k in range(1, n + 1)] + ["h", "M"], rows, "toy_run")
    write_gnuplot(out / "toy_run.gp", "toy_run.csv", list(range(2, n + 2)),
                  [f"|b_{k}|" for k in range(1, n + 1)], "t", "modulus")
    h0, m0 = toy_hamiltonian(y0), toy_mass(y0)
    h1, m1 = toy_hamiltonian(traj.y_final), toy_mass(traj.y_final)
    print(f"h drift {abs(h1 - h0) / abs(h0):.3e}  M drift {abs(m1 - m0) / m0:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------- lambda

def _load_lambda(path):
    from .lattice import LambdaSet
    return LambdaSet.from_dict(read_json(path))


def cmd_lambda_build(cfg, out: Path):
    from .lattice import build_lambda, verify_lambda
    p = cfg.section("lambda")
    lam = build_lambda(p["n_generations"], p["gen_size"], p["radius"], p["seed"], p["profile"])
    verdict = verify_lambda(lam)
    write_json(out / "lambda.json", lam.to_dict(), "lambda_set")
    write_json(out / "verdict.json", verdict.to_dict(), "verdict")
    print(f"{len(lam.points)} points, max |coordinate| {lam.max_abs()}, verified: {verdict.ok}")
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_lambda_verify(cfg, out: Path, source, box_scan=False):
    from .lattice import verify_lambda
    verdict = verify_lambda(_load_lambda(source), box_scan=box_scan)
    write_json(out / "verdict.json", verdict.to_dict(), "verdict")
    print(" ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in verdict.flags().items()))
    return EXIT_OK if verdict.ok else EXIT_FAIL


def cmd_lambda_sums(cfg, out: Path, source):
    from .lattice import growth_bound_holds, sobolev_sums
    lam = _load_lambda(source)
    s = cfg.section("lambda")["s"]
    sums, ratio = sobolev_sums(lam, s)
    write_csv(out / "sums.csv", ["generation", "points", "S_j"],
              [[j + 1, len(g), v] for j, (g, v) in enumerate(zip(lam.generations, sums))], "sobolev_sums")
    doc = {"s": s, "sums": sums, "ratio": ratio}
    if lam.n_generations >= 4:
        doc["bound"] = 0.5 * 2 ** ((s - 1) * (lam.n_generations - 4))
        doc["growth_bound_holds"] = growth_bound_holds(lam, s)
    write_json(out / "sums.json", doc, "sobolev_sums")
    if ratio is None:
        print("S_(N-1)/S_3 needs at least four generations; per-generation sums written")
    else:
        print(f"S_(N-1)/S_3 = {ratio:.6g}" + (f", bound holds: {doc['growth_bound_holds']}" if "bound" in doc else ""))
    return EXIT_OK if doc.get("growth_bound_holds", True) else EXIT_FAIL


# ---------------------------------------------------------------- cascade

def _emit_cascade(out: Path, params, y0, samples):
    from .cascade import cascade_diagnostics, cascade_trajectory, mode_series
    traj = cascade_trajectory(params, y0)
    report = cascade_diagnostics(traj, params)
    n = params.toy.n_modes
    write_json(out / "report.json", report.to_dict(), "cascade_report")
    write_csv(out / "modes.csv", ["t"] + [f"|b_{k}|" for k in range(1, n + 1)] + ["h", "M"],
              mode_series(traj, samples), "cascade_modes")
    write_gnuplot(out / "modes.gp", "modes.csv", list(range(2, n + 2)), [f"|b_{k}|" for k in range(1, n + 1)],
                  "t", "modulus")
    print(f"ok={report.ok} T0={report.total_time:.6g} h drift {report.h_drift:.2e} M drift {report.m_drift:.2e}")
    return report


def cmd_cascade_search(cfg, out: Path):
    from .cascade import search_cascade_orbit
    params = cfg.cascade_params()
    state, _ = search_cascade_orbit(params)
    write_json(out / "initial_state.json", {"parameters": cfg.values["toy"], "cascade": cfg.values["cascade"],
                                            "modes": [{"re": float(v.real), "im": float(v.imag)}
                                                      for v in state.modes]}, "cascade_initial_state")
    report = _emit_cascade(out, params, state.modes, cfg.section("cascade")["samples"])
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_cascade_report(cfg, out: Path, source):
    doc = read_json(source)
    for k, v in doc.get("parameters", {}).items():
        cfg.set("toy", k, v)
    for k, v in doc.get("cascade", {}).items():
        cfg.set("cascade", k, v)
    y0 = np.array([complex(m["re"], m["im"]) for m in doc["modes"]])
    report = _emit_cascade(out, cfg.cascade_params(), y0, cfg.section("cascade")["samples"])
    return EXIT_OK if report.ok else EXIT_FAIL


# ---------------------------------------------------------------- galerkin

def _galerkin_inputs(cfg, source=None):
    from .cascade import CascadeParams, cascade_trajectory, search_cascade_orbit
    from .lattice import build_lambda
    from .toy import ToyParams
    g = cfg.section("galerkin")
    lam = _load_lambda(source) if source else build_lambda(g["n_generations"], 4, seed=g["seed"])
    t = cfg.section("toy")
    params = CascadeParams(toy=ToyParams(lam.n_generations, t["delta"], t["sigma"], t["nu"]))
    state, _ = search_cascade_orbit(params)
    return lam, cascade_trajectory(params, state.modes)


def cmd_galerkin_compare(cfg, out: Path, source=None):
    from .galerkin import compare_with_lift
    g = cfg.section("galerkin")
    lam, toy = _galerkin_inputs(cfg, source)
    results = [compare_with_lift(lam, toy, lam_, g["flow"], samples=g["samples"]) for lam_ in g["lambdas"]]
    rows = [[k] + [results[0].times[k] / results[0].rescaling ** 2] + [r.errors[k] for r in results] for k in range(g["samples"])]
    write_csv(out / "approximation.csv", ["sample", "toy_time"] + [f"error_lambda_{r.rescaling:g}" for r in results],
              rows, "approximation_error")
    write_gnuplot(out / "approximation.gp", "approximation.csv", [3 + i for i in range(len(results))],
                  [f"lambda={r.rescaling:g}" for r in results], "toy time", "l1 error", "y")
    maxima = [r.max_error for r in results]
    monotone = all(b < a for a, b in zip(maxima, maxima[1:]))
    write_json(out / "approximation.json", {"results": [r.to_dict() for r in results], "monotone": monotone,
                                            "lambda_set": lam.to_dict()}, "approximation")
    print("max l1 error by rescaling: " + ", ".join(f"{r.rescaling:g}: {r.max_error:.3e}" for r in results)
          + f"; decreasing: {monotone}")
    return EXIT_OK if monotone else EXIT_FAIL


def cmd_galerkin_norms(cfg, out: Path, source=None):
    from .galerkin import LiftConfig, generation_sobolev, lift_toy_orbit, sobolev_norm
    g = cfg.section("galerkin")
    lam, toy = _galerkin_inputs(cfg, source)
    lift = lift_toy_orbit(toy, lam, LiftConfig())
    ts = np.linspace(toy.t0, toy.t1, g["samples"])
    rows = []
    for t in ts:
        a = lift(t)
        rows.append([t, sobolev_norm(a, g["s"]) ** 2] + generation_sobolev(a, lam, g["s"]))
    write_csv(out / "sobolev.csv", ["t", "Hs_norm_sq"] + [f"gen_{j}" for j in range(1, lam.n_generations + 1)],
              rows, "generation_sobolev")
    write_gnuplot(out / "sobolev.gp", "sobolev.csv", [2], ["||a||_Hs^2"], "t", "norm", "y")
    print(f"H^s norm squared grows by {rows[-1][1] / rows[0][1]:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------- normal form

def cmd_nf_check(cfg, out: Path):
    from .normal_form import scaling_exponents
    p = cfg.section("nf")
    res = scaling_exponents(amplitudes=p["amplitudes"], seed=p["seed"])
    ok = abs(res["displacement_slope"] - 3) <= 0.1 and abs(res["remainder_field_slope"] - 5) <= 0.2
    res["pass"] = ok
    write_json(out / "normal_form.json", res, "normal_form_scaling")
    write_csv(out / "normal_form.csv", ["amplitude", "displacement_l1", "remainder", "remainder_field_l1"],
              zip(res["amplitudes"], res["displacement"], res["remainder"], res["remainder_field"]),
              "normal_form_scaling")
    print(f"slopes: displacement {res['displacement_slope']:.4f}, remainder field "
          f"{res['remainder_field_slope']:.4f}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- sweep

def _sweep_cell(cell):
    """One grid cell; returns a flat dict.  Top level so worker processes can import it."""
    kind, params = cell
    t0 = time.perf_counter()
    row = dict(params)
    try:
        if kind == "cascade":
            from .cascade import CascadeParams, search_cascade_orbit
            from .toy import ToyParams
            _, rep = search_cascade_orbit(CascadeParams(toy=ToyParams(int(params["N"]), params["delta"])))
            row.update(ok=rep.ok, T0=rep.end_time, h_drift=rep.h_drift, m_drift=rep.m_drift)
        elif kind == "cancellation":
            from .frames import cancellation_ratio
            row.update(ratio=cancellation_ratio(params["delta"])["ratio"], ok=True)
        elif kind == "lambda":
            from .lattice import build_lambda, verify_lambda
            lam = build_lambda(int(params["N"]), int(params.get("gen_size", 4)), seed=int(params["seed"]))
            row.update(ok=verify_lambda(lam).ok, max_abs=lam.max_abs())
        else:
            raise PreconditionError(f"unknown sweep command {kind}")
    except CascadeLabError as exc:
        row.update(ok=False, error=type(exc).__name__)
    row["seconds"] = round(time.perf_counter() - t0, 1)
    return row


SWEEP_KEYS = {"cascade": ("N", "delta"), "cancellation": ("delta",), "lambda": ("N", "seed", "gen_size")}


def cmd_sweep(cfg, out: Path, kind, grid, threads):
    axes = {}
    for item in grid:
        key, _, values = item.partition("=")
        if key not in SWEEP_KEYS.get(kind, ()):
            raise PreconditionError(f"grid key {key!r} not accepted by sweep {kind}")
        cast = float if key == "delta" else int
        try:
            axes[key] = [cast(v) for v in values.split(",") if v]
        except ValueError as exc:
            raise PreconditionError(f"bad grid values for {key}: {values!r}") from exc
    missing = [k for k in SWEEP_KEYS[kind] if k not in axes and k != "gen_size"]
    if missing:
        raise PreconditionError(f"sweep {kind} needs grid values for {missing}")
    keys = list(axes)
    cells = [(kind, dict(zip(keys, combo))) for combo in itertools.product(*(axes[k] for k in keys))]
    n = worker_count(threads, cfg.section("sweep")["threads"])
    if n == 1:
        rows = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    header = sorted({k for r in rows for k in r} - {"seconds"})
    write_csv(out / f"sweep_{kind}.csv", header, [[r.get(k, "") for k in header] for r in rows], f"sweep_{kind}")
    bad = sum(1 for r in rows if not r.get("ok"))
    print(f"{len(rows)} cells on {n} worker(s), {bad} failed")
    return EXIT_OK if bad == 0 else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cascade-lab", description="Resonant cascade experiments.")
    p.add_argument("--version", action="version",
                   version=f"cascade-lab {__version__} (schema {SCHEMA_VERSION}, kernels {BACKEND})")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style config file")
    common.add_argument("--out", default=".", help="output directory")
    sub = p.add_subparsers(dest="group", required=True)

    def toy_flags(q):
        q.add_argument("--N", type=int)
        q.add_argument("--delta", type=float)
        q.add_argument("--sigma", type=float)
        q.add_argument("--nu", type=float)

    toy = sub.add_parser("toy", help="toy-model integrations").add_subparsers(dest="action", required=True)
    q = toy.add_parser("run", parents=[common], help="integrate near a periodic orbit")
    toy_flags(q)
    q.add_argument("--j", type=int)
    q.add_argument("--t", type=_span, help="START:END")
    q.add_argument("--samples", type=int)
    q.add_argument("--perturbation", type=float)
    q.add_argument("--seed", type=int)
    q = toy.add_parser("hetero", parents=[common], help="integrated vs closed-form heteroclinic")
    q.add_argument("--N", type=int)
    q.add_argument("--j", type=int)
    q.add_argument("--t", type=_span, help="START:END")
    q.add_argument("--samples", type=int)

    lam = sub.add_parser("lambda", help="lattice sets").add_subparsers(dest="action", required=True)
    q = lam.add_parser("build", parents=[common], help="place and verify a set")
    q.add_argument("--N", type=int)
    q.add_argument("--gen-size", dest="gen_size", type=int)
    q.add_argument("--radius", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--profile", choices=("plain", "spreading"))
    q = lam.add_parser("verify", parents=[common], help="verify a stored set")
    q.add_argument("--input", required=True)
    q.add_argument("--box-scan", action="store_true", help="also run the brute-force box scan")
    q = lam.add_parser("sums", parents=[common], help="Sobolev sums of a stored set")
    q.add_argument("--input", required=True)
    q.add_argument("--s", type=float)

    cas = sub.add_parser("cascade", help="cascade orbits").add_subparsers(dest="action", required=True)
    q = cas.add_parser("search", parents=[common], help="search for a cascade orbit")
    toy_flags(q)
    q.add_argument("--entry-depth", dest="entry_depth", type=float)
    q.add_argument("--samples", type=int)
    q = cas.add_parser("report", parents=[common], help="re-integrate a stored initial state")
    q.add_argument("--input", required=True)
    q.add_argument("--samples", type=int)

    gal = sub.add_parser("galerkin", help="Fourier-side flows").add_subparsers(dest="action", required=True)
    for name, text in (("compare", "approximation error against the lifted toy orbit"),
                       ("norms", "per-generation Sobolev table along the lift")):
        q = gal.add_parser(name, parents=[common], help=text)
        q.add_argument("--N", type=int)
        q.add_argument("--input", help="stored lattice set (default: build one)")
        q.add_argument("--seed", type=int)
        q.add_argument("--samples", type=int)
        q.add_argument("--delta", type=float)
        if name == "compare":
            q.add_argument("--lambdas", type=_csv_floats)
            q.add_argument("--flow", choices=("resonant", "gauge"))
        else:
            q.add_argument("--s", type=float)

    nf = sub.add_parser("nf", help="normal form").add_subparsers(dest="action", required=True)
    q = nf.add_parser("check", parents=[common], help="amplitude scaling of the change and the remainder")
    q.add_argument("--amplitudes", type=_csv_floats)
    q.add_argument("--seed", type=int)

    q = sub.add_parser("sweep", parents=[common], help="parameter grid over a cell command")
    q.add_argument("--command", dest="kind", required=True, choices=sorted(SWEEP_KEYS))
    q.add_argument("--grid", action="append", default=[], help="KEY=v1,v2,... (repeatable)")
    q.add_argument("--threads", type=int)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # spans such as "--t -3:3" start with a minus sign; bind them to the flag
    for k in range(len(argv) - 1):
        if argv[k] == "--t" and argv[k + 1].startswith("-"):
            argv[k:k + 2] = [f"--t={argv[k + 1]}", ""]
    argv = [a for a in argv if a != ""]
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    group, action = args.group, getattr(args, "action", None)
    command = f"{group} {action}" if action else group
    try:
        cfg = ExperimentConfig.load(args.config)
        if group == "galerkin" and getattr(args, "delta", None) is not None:
            cfg.values["toy"]["delta"] = args.delta
        _apply(cfg, group, args)
        cfg.validate(group)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if command == "toy run":
            return cmd_toy_run(cfg, out)
        if command == "toy hetero":
            return cmd_toy_hetero(cfg, out)
        if command == "lambda build":
            return cmd_lambda_build(cfg, out)
        if command == "lambda verify":
            return cmd_lambda_verify(cfg, out, args.input, args.box_scan)
        if command == "lambda sums":
            return cmd_lambda_sums(cfg, out, args.input)
        if command == "cascade search":
            return cmd_cascade_search(cfg, out)
        if command == "cascade report":
            return cmd_cascade_report(cfg, out, args.input)
        if command == "galerkin compare":
            return cmd_galerkin_compare(cfg, out, args.input)
        if command == "galerkin norms":
            return cmd_galerkin_norms(cfg, out, args.input)
        if command == "nf check":
            return cmd_nf_check(cfg, out)
        if command == "sweep":
            return cmd_sweep(cfg, out, args.kind, args.grid, args.threads)
    except PreconditionError as exc:
        print(f"cascade-lab {command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:  # unreadable or malformed input files
        print(f"cascade-lab {command}: cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SearchFailed as exc:
        print(f"cascade-lab {command}: search failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CascadeLabError as exc:
        print(f"cascade-lab {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    parser.error(f"unknown command {command}")
    return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
