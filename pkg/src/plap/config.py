"""Scenario files: [section] headers, key = value lines, comments after #
(or lines starting with ;).

Coefficients are given as `const <v>`, `expr <start>: <c0> <c1> ...; ...`
(polynomials in x, each piece valid from its start to the next one) or
`file <csv>` with x,value rows interpolated onto the nodes.
"""
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .grid import make_grid, read_field_csv

SUBCOMMANDS = ("solve", "branch", "regions", "spectra", "verify")

PROBLEM_KEYS = {"p", "mu", "lambda", "lambda_range", "k", "k_range", "c", "h",
                "domain", "n", "mu_plus", "mu_minus"}
RUN_KEYS = {"subcommand", "tol", "seed", "max_iter", "output", "threads",
            "lambda_samples", "lambda_max", "step", "k_step", "mp_points", "q"}
SECTIONS = {"problem": PROBLEM_KEYS, "run": RUN_KEYS}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class Coefficient:
    kind: str
    text: str
    line: int
    pieces: list = field(default_factory=list)
    value: float = 0.0
    path: str = ""

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.full(x.shape, self.value)
        if self.kind == "expr":
            out = np.empty_like(x)
            starts = [s for s, _ in self.pieces]
            idx = np.searchsorted(starts, x, side="right") - 1
            for j, (_, coef) in enumerate(self.pieces):
                sel = idx == j
                out[sel] = np.polynomial.polynomial.polyval(x[sel], coef)
            return out
        xs, vs = read_field_csv(self.path)
        order = np.argsort(xs)
        return np.interp(x, xs[order], vs[order])


@dataclass
class Scenario:
    p: float
    mu: float
    c: Coefficient
    h: Coefficient
    domain: tuple
    n: int
    lam: float | None = None
    lambda_range: tuple | None = None
    k: float = 1.0
    k_range: tuple | None = None
    mu_plus: float | None = None
    mu_minus: float = 0.0
    subcommand: str | None = None
    tol: float = 1e-9
    seed: int = 0
    max_iter: int = 500
    output: str = "plap_out"
    threads: int | None = None
    lambda_samples: int = 16
    lambda_max: float | None = None
    step: float | None = None
    k_step: float | None = None
    mp_points: int = 41
    q: float | None = None
    sha256: str = ""

    def grid(self):
        kind = self.domain[0]
        if kind == "interval":
            return make_grid("interval", self.n, a=self.domain[1], b=self.domain[2])
        return make_grid("radial", self.n, R=self.domain[1], N=int(self.domain[2]))

    def spec(self, **over):
        from .nonlinearity import ProblemSpec

        g = self.grid()
        kw = dict(grid=g, p=self.p, mu=self.mu,
                  lam=self.lam if self.lam is not None else
                  (self.lambda_range[0] if self.lambda_range else 0.0),
                  c=self.c.evaluate(g.nodes), h=self.h.evaluate(g.nodes),
                  k=self.k if self.k_range is None else self.k_range[0],
                  mu_plus=self.mu_plus, mu_minus=self.mu_minus)
        kw.update(over)
        return ProblemSpec(**kw)


def _tokenize(text):
    """Yield (line_number, section, key, value) and collect syntax errors."""
    errors, items = [], []
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                errors.append(f"line {no}: unknown section [{section}]")
            continue
        if "=" not in line:
            errors.append(f"line {no}: expected key = value")
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if section is None:
            errors.append(f"line {no}: key {key!r} outside any section")
            continue
        if section in SECTIONS and key not in SECTIONS[section]:
            errors.append(f"line {no}: unknown key {key!r} in [{section}]")
            continue
        items.append((no, section, key, val))
    return items, errors


def _coefficient(val, no, base_dir, errors):
    parts = val.split(None, 1)
    if not parts:
        errors.append(f"line {no}: empty coefficient")
        return None
    kind = parts[0].lower()
    rest = parts[1] if len(parts) > 1 else ""
    if kind == "const":
        try:
            return Coefficient("const", val, no, value=float(rest))
        except ValueError:
            errors.append(f"line {no}: const needs a number, got {rest!r}")
            return None
    if kind == "expr":
        pieces = []
        for chunk in rest.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                errors.append(f"line {no}: expr piece {chunk!r} needs 'start: coefficients'")
                return None
            s, coefs = chunk.split(":", 1)
            try:
                pieces.append((float(s), [float(t) for t in coefs.split()]))
            except ValueError:
                errors.append(f"line {no}: expr piece {chunk!r} is not numeric")
                return None
            if not pieces[-1][1]:
                errors.append(f"line {no}: expr piece {chunk!r} has no coefficients")
                return None
        if not pieces:
            errors.append(f"line {no}: expr needs at least one piece")
            return None
        starts = [s for s, _ in pieces]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            errors.append(f"line {no}: expr piece starts must increase")
            return None
        return Coefficient("expr", val, no, pieces=pieces)
    if kind == "file":
        path = rest.strip()
        if not os.path.isabs(path):
            path = os.path.join(base_dir or ".", path)
        try:
            xs, vs = read_field_csv(path)
        except (OSError, ValueError) as exc:
            errors.append(f"line {no}: unreadable coefficient file {path!r} ({exc})")
            return None
        if xs.size < 2 or not np.all(np.isfinite(vs)):
            errors.append(f"line {no}: coefficient file {path!r} needs two finite rows")
            return None
        return Coefficient("file", val, no, path=path)
    errors.append(f"line {no}: coefficient must start with const, expr or file")
    return None


def _number(val, no, errors, cast=float, what="number"):
    try:
        return cast(val)
    except ValueError:
        errors.append(f"line {no}: expected a {what}, got {val!r}")
        return None


def _numbers(val, no, errors, count):
    toks = val.split()
    if len(toks) not in count:
        errors.append(f"line {no}: expected {' or '.join(map(str, count))} numbers")
        return None
    try:
        return tuple(float(t) for t in toks)
    except ValueError:
        errors.append(f"line {no}: expected numbers, got {val!r}")
        return None


def parse_config(text, base_dir=None, subcommand=None):
    """Validated Scenario, or ConfigError listing line-anchored problems."""
    items, errors = _tokenize(text)
    seen, vals, lines = {}, {}, {}
    for no, section, key, val in items:
        if key in seen:
            errors.append(f"line {no}: duplicate key {key!r} (first on line {seen[key]})")
            continue
        seen[key] = no
        vals[key] = val
        lines[key] = no
    kw = {}
    for req in ("p", "mu", "c", "h", "domain", "n"):
        if req not in vals:
            errors.append(f"line {len(text.splitlines()) or 1}: missing required key {req!r}")
    floats = {"p": "p", "mu": "mu", "lambda": "lam", "k": "k", "mu_plus": "mu_plus",
              "mu_minus": "mu_minus", "tol": "tol", "lambda_max": "lambda_max",
              "step": "step", "k_step": "k_step", "q": "q"}
    for key, attr in floats.items():
        if key in vals:
            kw[attr] = _number(vals[key], lines[key], errors)
    ints = {"n": "n", "seed": "seed", "max_iter": "max_iter", "threads": "threads",
            "lambda_samples": "lambda_samples", "mp_points": "mp_points"}
    for key, attr in ints.items():
        if key in vals:
            kw[attr] = _number(vals[key], lines[key], errors, int, "whole number")
    for key in ("lambda_range", "k_range"):
        if key in vals:
            kw[key] = _numbers(vals[key], lines[key], errors, (2,))
    for key in ("c", "h"):
        if key in vals:
            kw[key] = _coefficient(vals[key], lines[key], base_dir, errors)
    if kw.get("c") is not None and kw["c"].kind == "const" and not kw["c"].value > 0:
        errors.append(f"line {lines['c']}: c must be nonnegative and not identically zero")
    if "domain" in vals:
        toks = vals["domain"].split()
        no = lines["domain"]
        if len(toks) == 3 and toks[0] in ("interval", "radial"):
            a = _number(toks[1], no, errors)
            b = _number(toks[2], no, errors)
            kw["domain"] = (toks[0], a, b)
            if toks[0] == "interval" and a is not None and b is not None and not a < b:
                errors.append(f"line {no}: interval needs a < b")
            if toks[0] == "radial" and a is not None and b is not None:
                if not a > 0:
                    errors.append(f"line {no}: radius must be positive")
                if b != int(b) or b < 2:
                    errors.append(f"line {no}: dimension must be a whole number >= 2")
        else:
            errors.append(f"line {no}: domain must be 'interval a b' or 'radial R N'")
    if "output" in vals:
        kw["output"] = vals["output"]
    if "subcommand" in vals:
        sc = vals["subcommand"]
        if sc not in SUBCOMMANDS:
            errors.append(f"line {lines['subcommand']}: subcommand must be one of {', '.join(SUBCOMMANDS)}")
        elif subcommand is not None and sc != subcommand:
            errors.append(f"line {lines['subcommand']}: config names {sc!r} but {subcommand!r} was requested")
        kw["subcommand"] = sc
    sub = subcommand or kw.get("subcommand")
    if sub is not None and "subcommand" not in kw:
        kw["subcommand"] = sub

    lines["lam"] = lines.get("lambda")

    def check(key, cond, msg):
        if key in kw and kw[key] is not None and not cond(kw[key]):
            errors.append(f"line {lines[key]}: {msg}")

    check("p", lambda v: v > 1, "p must exceed 1")
    check("mu", lambda v: v > 0, "mu must be positive")
    check("n", lambda v: v >= 5, "n must be at least 5")
    check("k", lambda v: v >= 0, "k must be nonnegative")
    check("tol", lambda v: 0 < v < 1, "tol must lie in (0, 1)")
    check("mu_minus", lambda v: v >= 0, "mu_minus must be nonnegative")
    check("mu_plus", lambda v: v > 0, "mu_plus must be positive")
    check("threads", lambda v: v >= 1, "threads must be at least 1")
    check("max_iter", lambda v: v >= 1, "max_iter must be at least 1")
    check("lambda_samples", lambda v: v >= 2, "lambda_samples must be at least 2")
    check("mp_points", lambda v: v >= 5 and v % 2 == 1, "mp_points must be odd and at least 5")
    check("k_range", lambda v: min(v) >= 0, "k_range must be nonnegative")
    if "lam" in kw and "lambda_range" in kw:
        errors.append(f"line {lines['lambda_range']}: give lambda or lambda_range, not both")
    if "k" in kw and "k_range" in kw:
        errors.append(f"line {lines['k_range']}: give k or k_range, not both")
    if sub == "solve":
        for key in ("lambda_range", "k_range"):
            if key in kw:
                errors.append(f"line {lines[key]}: {key} requires the branch subcommand")
    if sub == "branch" and "lambda_range" not in kw and "k_range" not in kw:
        errors.append(f"line {len(text.splitlines()) or 1}: branch needs lambda_range or k_range")
    if sub == "branch" and "lambda_range" in kw and "k_range" in kw:
        errors.append(f"line {lines['k_range']}: branch traces one parameter at a time")
    if sub == "regions" and "k_range" in kw:
        errors.append(f"line {lines['k_range']}: regions chooses its own k values")
    scen = None
    if not errors:
        for key in ("c", "h"):
            if kw.get(key) is None:
                errors.append(f"line {lines[key]}: invalid coefficient")
    if not errors:
        kw["sha256"] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        scen = Scenario(**kw)
        g = scen.grid()
        for key in ("c", "h"):
            coef = kw[key]
            if coef.kind == "expr" and coef.pieces[0][0] > g.nodes[0] + 1e-12:
                errors.append(f"line {coef.line}: expr must start at or before {g.nodes[0]:g}")
                continue
            vals_ = coef.evaluate(g.nodes)
            if not np.all(np.isfinite(vals_)):
                errors.append(f"line {coef.line}: {key} is not finite on the grid")
        if not errors:
            cv = scen.c.evaluate(g.nodes)
            if np.any(cv < 0) or not np.any(cv > 0):
                errors.append(f"line {scen.c.line}: c must be nonnegative and not identically zero")
    if errors:
        raise ConfigError(errors)
    return scen


def load_config(path, subcommand=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)), subcommand)
