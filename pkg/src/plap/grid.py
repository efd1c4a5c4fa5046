"""Uniform meshes on an interval or on the radial section of a ball.

Gradients are cell-wise constant. Cell integrals use the exact measure
of each cell (the radial factor r^(N-1) is integrated exactly), and
zeroth-order integrals use the dual cell around each node.
"""
from dataclasses import dataclass

import numpy as np


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    a: float
    b: float
    dim: int
    nodes: np.ndarray
    dx: np.ndarray
    weights: np.ndarray
    radial_factor: np.ndarray
    node_weights: np.ndarray

    @property
    def n(self):
        return self.nodes.shape[0]

    @property
    def free(self):
        """Mask of unknown nodes: interior ones, plus the centre of a ball."""
        m = np.ones(self.n, dtype=bool)
        m[-1] = False
        if self.kind == "interval":
            m[0] = False
        return m

    @property
    def h(self):
        return float(self.dx.max())

    @property
    def measure(self):
        return float(self.weights.sum())

    def describe(self):
        if self.kind == "interval":
            return f"interval({self.a:g},{self.b:g}) n={self.n}"
        return f"radial(R={self.b:g},N={self.dim}) n={self.n}"


def _measure(x, dim):
    return x ** dim / dim


def make_grid(kind, n, a=0.0, b=1.0, R=1.0, N=2):
    """Build a uniform grid.

    kind is "interval" (uses a, b) or "radial" (uses R and N).
    """
    n = int(n)
    if n < 4:
        raise ValueError(f"need at least 4 nodes, got {n}")
    if kind == "interval":
        if not a < b:
            raise ValueError(f"interval needs a < b, got ({a}, {b})")
        dim = 1
        nodes = np.linspace(a, b, n)
    elif kind == "radial":
        if R <= 0:
            raise ValueError(f"radius must be positive, got {R}")
        if int(N) != N or N < 2:
            raise ValueError(f"radial dimension must be an integer >= 2, got {N}")
        dim = int(N)
        a, b = 0.0, float(R)
        nodes = np.linspace(0.0, b, n)
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    dx = np.diff(nodes)
    if kind == "interval":
        weights = dx.copy()
        node_w = np.zeros(n)
        node_w[:-1] += dx / 2
        node_w[1:] += dx / 2
    else:
        weights = _measure(nodes[1:], dim) - _measure(nodes[:-1], dim)
        mids = np.concatenate(([0.0], (nodes[1:] + nodes[:-1]) / 2, [b]))
        node_w = _measure(mids[1:], dim) - _measure(mids[:-1], dim)
    return Grid(kind, float(a), float(b), dim, _frozen(nodes), _frozen(dx),
                _frozen(weights), _frozen(weights / dx), _frozen(node_w))


def interval(a, b, n):
    return make_grid("interval", n, a=a, b=b)


def radial(R, N, n):
    return make_grid("radial", n, R=R, N=N)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"field has {v.shape} values for {self.grid.n} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def is_dirichlet(self):
        v = self.values
        if self.grid.kind == "interval":
            return v[0] == 0.0 and v[-1] == 0.0
        return v[-1] == 0.0

    def sup(self):
        return float(np.max(np.abs(self.values)))


def field_from(grid, fn):
    return Field(grid, fn(np.asarray(grid.nodes)))


def dirichlet(grid, values):
    """Field with boundary values forced to 0."""
    v = np.array(values, dtype=float)
    v[~grid.free] = 0.0
    return Field(grid, v)


def values_of(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


def norm_W1p(f, p, grid=None):
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    grid = grid or f.grid
    s = np.diff(values_of(f)) / grid.dx
    return float(np.sum(grid.weights * np.abs(s) ** p) ** (1.0 / p))


def integrate(grid, values):
    return float(np.dot(grid.node_weights, values))


def norm_Lq(f, q, grid=None):
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    grid = grid or f.grid
    v = np.abs(values_of(f))
    if np.isinf(q):
        return float(v.max())
    return integrate(grid, v ** q) ** (1.0 / q)


def write_field_csv(field, path, meta=None):
    """x,value rows with 17 significant digits; meta goes into # lines."""
    lines = []
    for key, val in (meta or {}).items():
        lines.append(f"# {key}={val}")
    lines.append("x,value")
    for x, v in zip(field.grid.nodes, field.values):
        lines.append(f"{x:.17g},{v:.17g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_csv(path):
    """Return (x, values) arrays from a field CSV."""
    xs, vs = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x,"):
                continue
            x, v = line.split(",")[:2]
            xs.append(float(x))
            vs.append(float(v))
    return np.array(xs), np.array(vs)
