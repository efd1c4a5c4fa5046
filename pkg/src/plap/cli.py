"""Command-line runner: plap <subcommand> --config FILE [--seed N] [--threads N] [--out DIR]."""
import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import SUBCOMMANDS, ConfigError, load_config
from .grid import write_field_csv

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_PROPERTY = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("plap")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Output:
    """Writes files into one directory, each stamped with hash and seed."""

    def __init__(self, directory, sha, seed):
        self.dir = directory
        self.sha = sha
        self.seed = seed
        os.makedirs(directory, exist_ok=True)
        self.written = []

    @property
    def meta(self):
        return {"config_sha256": self.sha, "seed": self.seed}

    def path(self, name):
        return os.path.join(self.dir, name)

    def json(self, name, payload):
        body = dict(self.meta)
        body.update(payload)
        with open(self.path(name), "w", newline="\n") as fh:
            json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self.written.append(name)

    def csv(self, name, header, rows, extra_meta=None):
        lines = [f"# {k}={v}" for k, v in self.meta.items()]
        lines += [f"# {k}={v}" for k, v in (extra_meta or {}).items()]
        lines.append(",".join(header))
        for row in rows:
            lines.append(",".join(_cell(v) for v in row))
        with open(self.path(name), "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        self.written.append(name)

    def field(self, name, field, extra_meta=None):
        meta = dict(self.meta)
        meta.update(extra_meta or {})
        write_field_csv(field, self.path(name), meta)
        self.written.append(name)

    def text(self, name, body):
        with open(self.path(name), "w", newline="\n") as fh:
            fh.write(body)
        self.written.append(name)


def _cell(v):
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


# -- subcommands -----------------------------------------------------------

def run_solve(scen, out, threads):
    from .solvers import solve_Plambda

    spec = scen.spec()
    reports = solve_Plambda(spec, tol=scen.tol, mp_points=scen.mp_points,
                            max_iter=scen.max_iter)
    items = []
    for i, rep in enumerate(reports):
        entry = {"lambda": spec.lam, "k": spec.k, "p": spec.p, "mu": spec.mu,
                 "status": rep.status, "lineage": rep.lineage, "energy": rep.energy,
                 "grad_norm": rep.grad_norm, "iterations": rep.iterations,
                 "sup_norm": None, "min_value": None, "residual_inf": rep.residual_P,
                 "residual_transformed": rep.residual_Q, "notes": rep.notes, "file": None}
        if rep.solution is not None:
            name = f"solution_{i}.csv"
            out.field(name, rep.solution, {"status": rep.status, "lineage": rep.lineage})
            entry.update(sup_norm=float(np.max(np.abs(rep.solution.values))),
                         min_value=float(np.min(rep.solution.values)), file=name)
        items.append(entry)
    out.json("solve.json", {"solutions": items})
    ok = any(r.converged for r in reports)
    for r in reports:
        log.info("%s: %s %s", r.lineage, r.status, "; ".join(r.notes))
    if not ok:
        for r in reports:
            print(f"no solution: {r.lineage}: {r.status} {'; '.join(r.notes)}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_SOLVER


def run_branch(scen, out, threads):
    from .continuation import detect_fold, trace
    from .plots import gnuplot_script, line_plot_svg
    from .spectra import gamma1

    if scen.lambda_range is not None:
        name, (start, stop) = "lambda", scen.lambda_range
        spec = scen.spec(lam=start)
        gamma = gamma1(spec.c, spec.p, spec.grid, seed=scen.seed).value
        step = scen.step or gamma / 100.0
    else:
        name, (start, stop) = "k", scen.k_range
        spec = scen.spec(k=start)
        gamma = None
        step = scen.step or max(abs(stop - start), 1e-3) / 100.0
    br = trace(spec, name, start, stop, step, step_min=step / 64.0, tol=scen.tol)
    fold = None
    if br.points and any(q.fold_flag for q in br.points):
        width = 1e-3 * (gamma if gamma is not None else max(1.0, abs(stop - start)))
        fold = detect_fold(br, spec, width=width, tol=scen.tol)
    out.csv("branch.csv", ["param", "energy", "min_value", "sup_norm", "fold_flag"],
            br.rows(), {"parameter": name})
    stored = []
    for i, q in enumerate(br.points):
        if q.solution is not None:
            fname = f"branch_point_{i:05d}.csv"
            out.field(fname, q.solution, {"parameter": name, "value": repr(q.param)})
            stored.append({"index": i, "param": q.param, "file": fname})
    out.json("branch.json", {
        "parameter": name, "points": len(br.points), "truncated": br.truncated,
        "notes": br.notes, "gamma1": gamma,
        "fold": None if fold is None else {"param": fold[0], "window": list(fold[1])},
        "stored_fields": stored})
    ps = [q.param for q in br.points]
    sup = [q.sup_norm for q in br.points]
    vl = [(gamma, "gamma1")] if gamma is not None else []
    mk = [(fold[0], max((q.sup_norm for q in br.points if q.fold_flag), default=0.0), "fold")] \
        if fold else []
    out.text("branch.svg", line_plot_svg([("sup |u|", ps, sup, False)], name, "sup |u|",
                                         f"solution branch in {name}", vl, (), mk))
    out.text("branch.gp", gnuplot_script("branch.csv", [(1, 4, "sup |u|")], name, "sup |u|",
                                         "branch_gnuplot.svg", vl))
    return EXIT_OK if br.points else EXIT_SOLVER


def run_regions(scen, out, threads):
    from .continuation import region_diagram, solvable_at_gamma1
    from .plots import gnuplot_script, line_plot_svg
    from .spectra import gamma1, k0

    spec = scen.spec(lam=0.0, k=1.0)
    gamma = gamma1(spec.c, spec.p, spec.grid, seed=scen.seed).value
    kz = k0(spec.h, spec.p, spec.mu, spec.grid, seed=scen.seed)
    if kz.is_infinite:
        print("regions needs h with a positive part", file=sys.stderr)
        return EXIT_USAGE
    kzero = kz.value
    half = max(1, scen.lambda_samples // 2)
    if scen.lambda_range is not None:
        lo, hi = scen.lambda_range
    else:
        lo, hi = 0.0, scen.lambda_max or 2.0 * gamma
    below = np.linspace(max(lo, 0.0), gamma, half + 2)[1:-1]
    above = np.linspace(gamma, max(hi, gamma * 1.05), half + 1)[1:]
    lams = np.concatenate([below, above])
    diag = region_diagram(spec, lams, tol=scen.tol, threads=threads, gamma=gamma,
                          kzero=kzero, k_step=scen.k_step)
    at_g = solvable_at_gamma1(spec, [0.01 * kzero, 0.1 * kzero], gamma=gamma, tol=scen.tol)
    diag.at_gamma1 = at_g
    rows = []
    for lam in lams:
        lam = float(lam)
        rows.append((lam, diag.kbar.get(lam), diag.ktilde1.get(lam), diag.ktilde2.get(lam)))
    out.csv("regions.csv", ["lambda", "kbar", "ktilde1", "ktilde2"], rows,
            {"gamma1": repr(gamma), "k0": repr(kzero)})
    mono = diag.monotonicity()
    out.json("regions.json", {
        "gamma1": gamma, "k0": kzero, "lambda_samples": lams,
        "kbar": {repr(k): v for k, v in diag.kbar.items()},
        "ktilde1": {repr(k): v for k, v in diag.ktilde1.items()},
        "ktilde2": {repr(k): v for k, v in diag.ktilde2.items()},
        "solvable_at_gamma1": {repr(k): v for k, v in at_g.items()},
        "unresolved": diag.unresolved,
        "checks": {"kbar_nonincreasing": mono[0], "ktilde1_nondecreasing": mono[1],
                   "kbar_below_k0": mono[2], "ktilde1_le_ktilde2": mono[3]},
        "label": "empirical: nonexistence is inferred from solver failure"})

    def curve(d):
        ks = sorted(d)
        return [k for k in ks if d[k] is not None], [d[k] for k in ks if d[k] is not None]

    series = [("kbar", *curve(diag.kbar), False), ("ktilde1", *curve(diag.ktilde1), False),
              ("ktilde2", *curve(diag.ktilde2), True)]
    out.text("regions.svg", line_plot_svg(series, "lambda", "k", "existence regions",
                                          [(gamma, "gamma1")], [(kzero, "k0")]))
    out.text("regions.gp", gnuplot_script("regions.csv", [(1, 2, "kbar"), (1, 3, "ktilde1"),
                                                          (1, 4, "ktilde2")],
                                          "lambda", "k", "regions_gnuplot.svg",
                                          [(gamma, "gamma1")]))
    return EXIT_OK if not diag.unresolved else EXIT_SOLVER


def run_spectra(scen, out, threads):
    from .spectra import gamma1, k0, m_p, m_p_lambda_pm, sobolev_case, sufficient_condition

    spec = scen.spec()
    g1 = gamma1(spec.c, spec.p, spec.grid, seed=scen.seed)
    mp = m_p(spec.datum, spec.p, spec.mu, spec.grid, seed=scen.seed)
    kz = k0(spec.h, spec.p, spec.mu, spec.grid, seed=scen.seed)
    plus, minus = m_p_lambda_pm(spec, seed=scen.seed)
    payload = {
        "p": spec.p, "mu": spec.mu, "lambda": spec.lam, "k": spec.k,
        "gamma1": {"value": g1.json_value(), "status": g1.status, "residual": g1.residual},
        "m_p": {"value": mp.json_value(), "status": mp.status},
        "k0": {"value": kz.json_value(), "status": kz.status},
        "m_p_lambda_plus": {"value": plus.json_value(), "status": plus.status,
                            "constraint": plus.constraint_active},
        "m_p_lambda_minus": {"value": minus.json_value(), "status": minus.status,
                             "constraint": minus.constraint_active},
    }
    case = sobolev_case(spec.grid, spec.p)
    if case != "ii" or scen.q is not None:
        payload["sufficient_condition"] = sufficient_condition(spec.datum, spec.p, spec.mu,
                                                              spec.grid, q=scen.q,
                                                              seed=scen.seed)
    if g1.minimizer is not None:
        out.field("eigenfunction.csv", g1.minimizer)
    out.json("spectra.json", payload)
    return EXIT_OK


def run_verify(scen, out, threads):
    from .verify import FAIL, default_suite

    reports = default_suite(seed=scen.seed, n=scen.n)
    with open(out.path("verify.json"), "w", newline="\n") as fh:
        body = [dict(out.meta, **r.to_json()) for r in reports]
        json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
        fh.write("\n")
    out.written.append("verify.json")
    for r in reports:
        print(f"{r.id}: {r.status}")
    return EXIT_PROPERTY if any(r.status == FAIL for r in reports) else EXIT_OK


RUNNERS = {"solve": run_solve, "branch": run_branch, "regions": run_regions,
           "spectra": run_spectra, "verify": run_verify}


def run(scenario, out_dir=None, seed=None, threads=None):
    """Dispatch a validated Scenario; returns the process exit code."""
    if seed is not None:
        scenario.seed = seed
    threads = threads or scenario.threads or os.cpu_count() or 1
    out = Output(out_dir or scenario.output, scenario.sha256, scenario.seed)
    try:
        return RUNNERS[scenario.subcommand](scenario, out, threads)
    except (ValueError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _configure_logging():
    level = os.environ.get("PLAP_LOG", "error").lower()
    if level not in LOG_LEVELS:
        print(f"PLAP_LOG must be one of {', '.join(LOG_LEVELS)}; using error", file=sys.stderr)
        level = "error"
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(LOG_LEVELS[level])


def build_parser():
    ap = argparse.ArgumentParser(prog="plap", description="p-Laplacian problems with "
                                 "critical gradient growth: solve, trace, map and verify.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None):
    _configure_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        scen = load_config(args.config, args.subcommand)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for e in exc.errors:
            print(f"{args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE
    return run(scen, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
