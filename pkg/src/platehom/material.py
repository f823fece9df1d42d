"""Periodic material fields Q(x3, y, .) on the thickness-times-cell domain.

A material field stores one SPD 6x6 Voigt matrix per (thickness quadrature
node, torus grid cell).  The thickness interval I = [-1/2, 1/2] is discretized
by Gauss-Legendre nodes; the periodicity cell Y = [0,1)^2 by a uniform
power-of-two collocation grid (the spectral solvers integrate over Y with the
trapezoid rule on this grid, which is exact for trigonometric polynomials
below the de-aliasing limit).

Fields are built from JSON configuration documents with three kinds:

* ``isotropic_analytic``: expressions for mu(y) and lambda(y) in a small
  grammar (numbers, ``pi``, ``y1``/``y2``/``x3``, ``sin``/``cos``, sums and
  products), plus an optional multiplicative ``x3_factor`` expression.
* ``isotropic_layers``: a list of ``(width, mu, lambda)`` layers in y1 with
  widths summing to 1, sampled at cell midpoints.
* ``voigt_grid``: explicit 6x6 matrices per (x3 node, grid cell).

All flags (x3-independence, layering, isotropy) are verified numerically on
the stored samples rather than trusted from the configuration.
"""

from __future__ import annotations

import ast
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .voigt import QuadForm2, QuadForm3, isotropic_voigt, reduce2d_voigt

_FLAG_TOL = 1e-14


class MaterialConfigError(ValueError):
    """Raised for schema violations and inadmissible material data."""


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------

_ALLOWED_NAMES = {"y1", "y2", "x3", "pi"}
_ALLOWED_FUNCS = {"sin", "cos"}
_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)


def _validate_expr_node(node):
    if isinstance(node, ast.Expression):
        return _validate_expr_node(node.body)
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise MaterialConfigError(f"non-numeric constant {node.value!r} in expression")
        return
    if isinstance(node, ast.Name):
        if node.id not in _ALLOWED_NAMES:
            raise MaterialConfigError(f"unknown symbol {node.id!r} in expression")
        return
    if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        _validate_expr_node(node.left)
        _validate_expr_node(node.right)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        _validate_expr_node(node.operand)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
            raise MaterialConfigError("only sin(...) and cos(...) calls are allowed")
        if len(node.args) != 1 or node.keywords:
            raise MaterialConfigError("sin/cos take exactly one positional argument")
        _validate_expr_node(node.args[0])
        return
    raise MaterialConfigError(f"disallowed syntax {type(node).__name__!r} in expression")


class Expr:
    """Compiled material expression over (y1, y2, x3)."""

    def __init__(self, text):
        if not isinstance(text, str):
            raise MaterialConfigError(f"expression must be a string, got {type(text).__name__}")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise MaterialConfigError(f"cannot parse expression {text!r}: {exc}") from exc
        _validate_expr_node(tree)
        self.text = text
        self._code = compile(tree, "<material-expr>", "eval")
        self._check_periodic()

    def __call__(self, y1, y2, x3=0.0):
        env = {"sin": np.sin, "cos": np.cos, "pi": np.pi,
               "y1": np.asarray(y1, dtype=float), "y2": np.asarray(y2, dtype=float),
               "x3": np.asarray(x3, dtype=float)}
        out = eval(self._code, {"__builtins__": {}}, env)
        return np.asarray(out, dtype=float) + np.zeros(np.broadcast(
            env["y1"], env["y2"], env["x3"]).shape)

    def _check_periodic(self):
        rng = np.random.default_rng(20240229)
        y1 = rng.uniform(0, 1, 16)
        y2 = rng.uniform(0, 1, 16)
        x3 = rng.uniform(-0.5, 0.5, 16)
        base = self(y1, y2, x3)
        scale = 1.0 + np.abs(base).max()
        if (np.abs(self(y1 + 1.0, y2, x3) - base).max() > 1e-9 * scale or
                np.abs(self(y1, y2 + 1.0, x3) - base).max() > 1e-9 * scale):
            raise MaterialConfigError(
                f"expression {self.text!r} is not 1-periodic in y; use integer "
                "frequencies like sin(2*pi*3*y1)")


# ---------------------------------------------------------------------------
# field containers
# ---------------------------------------------------------------------------

def gauss_nodes_unit_interval(m):
    """Gauss-Legendre nodes and weights on I = [-1/2, 1/2]."""
    if m < 1:
        raise MaterialConfigError("x3_nodes must be >= 1")
    x, w = np.polynomial.legendre.leggauss(int(m))
    return 0.5 * x, 0.5 * w


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _verify_flags(samples):
    """Detect structure directly from the samples (flags are never trusted)."""
    scale = np.abs(samples).max() + 1.0
    x3_ind = bool(np.abs(samples - samples[:1]).max() <= _FLAG_TOL * scale)
    layered = bool(np.abs(samples - samples[:, :, :1]).max() <= _FLAG_TOL * scale)
    return x3_ind, layered


@dataclass(frozen=True)
class MaterialField:
    """Sampled periodic energy density, immutable after construction.

    samples has shape (M, n1, n2, 6, 6); x3_nodes/x3_weights are the
    Gauss-Legendre rule on I; c1/c2 are the global eigenvalue bounds over all
    samples.  ``generator(x3, y1, y2)`` resamples the underlying analytic
    family at arbitrary points when available.
    """

    samples: np.ndarray
    x3_nodes: np.ndarray
    x3_weights: np.ndarray
    is_x3_independent: bool
    is_layered: bool
    is_isotropic: bool
    c1: float
    c2: float
    mu: np.ndarray | None = None
    lam: np.ndarray | None = None
    generator: object = None
    config: dict | None = None

    def __post_init__(self):
        for name in ("samples", "x3_nodes", "x3_weights", "mu", "lam"):
            arr = getattr(self, name)
            if arr is not None:
                np.asarray(arr).setflags(write=False)

    @property
    def grid_size(self):
        return self.samples.shape[1], self.samples.shape[2]

    @property
    def n_x3(self):
        return self.samples.shape[0]

    @property
    def digest(self):
        if self.config is not None:
            payload = json.dumps(self.config, sort_keys=True).encode()
        else:
            payload = self.samples.tobytes()
        return hashlib.sha256(payload).hexdigest()[:16]

    def sample(self, k, j):
        """Stored form at x3 node k and torus cell j = (j1, j2); j wraps."""
        if not 0 <= k < self.n_x3:
            raise IndexError(f"x3 index {k} out of range [0, {self.n_x3})")
        j1, j2 = j
        n1, n2 = self.grid_size
        return QuadForm3(self.samples[k, j1 % n1, j2 % n2])

    def sample_at_x3(self, x3):
        """Samples at arbitrary thickness coordinates, shape (len(x3), n1, n2, 6, 6)."""
        x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        if self.generator is not None:
            n1, n2 = self.grid_size
            y1, y2 = _grid_points(n1, n2, midpoint=self.config is not None
                                  and self.config.get("kind") == "isotropic_layers")
            return self.generator(x3[:, None, None], y1[None], y2[None])
        if self.is_x3_independent:
            return np.broadcast_to(self.samples[:1], (len(x3),) + self.samples.shape[1:]).copy()
        raise MaterialConfigError(
            "material has no analytic generator and depends on x3; cannot resample")

    def eval_at(self, x3, y1, y2):
        """Voigt matrices at arbitrary (x3, y) points; requires an analytic generator
        unless the field is homogeneous."""
        x3 = np.asarray(x3, dtype=float)
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if self.generator is not None:
            return self.generator(x3, y1, y2)
        flat = self.samples.reshape(-1, 36)
        if np.abs(flat - flat[0]).max() <= _FLAG_TOL * (1 + np.abs(flat).max()):
            shape = np.broadcast(x3, y1, y2).shape
            return np.broadcast_to(self.samples[0, 0, 0], shape + (6, 6)).copy()
        raise MaterialConfigError(
            "pointwise evaluation requires an analytic material or a homogeneous one")


@dataclass(frozen=True)
class ReducedField:
    """Plane-stress-reduced field: one SPD 3x3 Voigt matrix per sample.

    Produced by :func:`reduce_field` only; inherits the parent bounds (the
    Schur complement is Loewner-monotone, so reduced spectra stay inside
    [c1, c2]).
    """

    samples: np.ndarray
    x3_nodes: np.ndarray
    x3_weights: np.ndarray
    is_x3_independent: bool
    is_layered: bool
    is_isotropic: bool
    c1: float
    c2: float
    config: dict | None = None

    def __post_init__(self):
        for name in ("samples", "x3_nodes", "x3_weights"):
            np.asarray(getattr(self, name)).setflags(write=False)

    @property
    def grid_size(self):
        return self.samples.shape[1], self.samples.shape[2]

    @property
    def n_x3(self):
        return self.samples.shape[0]

    @property
    def digest(self):
        if self.config is not None:
            payload = ("reduced:" + json.dumps(self.config, sort_keys=True)).encode()
        else:
            payload = b"reduced:" + self.samples.tobytes()
        return hashlib.sha256(payload).hexdigest()[:16]

    def sample(self, k, j):
        if not 0 <= k < self.n_x3:
            raise IndexError(f"x3 index {k} out of range [0, {self.n_x3})")
        j1, j2 = j
        n1, n2 = self.grid_size
        return QuadForm2(self.samples[k, j1 % n1, j2 % n2])


def reduce_field(fld: MaterialField) -> ReducedField:
    """Apply the plane-stress reduction to every sample; flags carry over."""
    reduced = reduce2d_voigt(fld.samples)
    return ReducedField(
        samples=reduced,
        x3_nodes=fld.x3_nodes,
        x3_weights=fld.x3_weights,
        is_x3_independent=fld.is_x3_independent,
        is_layered=fld.is_layered,
        is_isotropic=fld.is_isotropic,
        c1=fld.c1,
        c2=fld.c2,
        config=fld.config,
    )


# ---------------------------------------------------------------------------
# construction from configuration documents
# ---------------------------------------------------------------------------

_COMMON_KEYS = {"kind", "grid", "x3_nodes"}
_KIND_KEYS = {
    "isotropic_analytic": _COMMON_KEYS | {"mu", "lambda", "x3_factor"},
    "isotropic_layers": _COMMON_KEYS | {"layers"},
    "voigt_grid": _COMMON_KEYS | {"matrices"},
}


def _grid_points(n1, n2, midpoint=False):
    off = 0.5 if midpoint else 0.0
    y1 = (np.arange(n1) + off) / n1
    y2 = (np.arange(n2) + off) / n2
    return y1[:, None] + 0.0 * y2[None, :], 0.0 * y1[:, None] + y2[None, :]


def _common_config(cfg):
    kind = cfg.get("kind")
    if kind not in _KIND_KEYS:
        raise MaterialConfigError(f"unknown material kind {kind!r}")
    unknown = set(cfg) - _KIND_KEYS[kind]
    if unknown:
        raise MaterialConfigError(f"unknown config keys {sorted(unknown)} for kind {kind!r}")
    grid = cfg.get("grid")
    if (not isinstance(grid, (list, tuple)) or len(grid) != 2
            or not all(isinstance(n, int) for n in grid)):
        raise MaterialConfigError("'grid' must be a pair of integers [n1, n2]")
    n1, n2 = grid
    if not (_is_power_of_two(n1) and _is_power_of_two(n2)):
        raise MaterialConfigError(f"grid sizes must be powers of two, got {n1}x{n2}")
    m = cfg.get("x3_nodes", 4)
    if not isinstance(m, int) or m < 1:
        raise MaterialConfigError("'x3_nodes' must be a positive integer")
    return kind, n1, n2, m


def _isotropic_field(mu_vals, lam_vals, nodes, weights, generator, cfg):
    if mu_vals.min() <= 0:
        raise MaterialConfigError("non-positive shear modulus")
    if lam_vals.min() < 0:
        raise MaterialConfigError("negative lambda is not supported")
    samples = isotropic_voigt(mu_vals, lam_vals)
    x3_ind, layered = _verify_flags(samples)
    # isotropic spectrum is {mu (x5), mu + 3 lam / 2}
    c1 = float(mu_vals.min())
    c2 = float((mu_vals + 1.5 * lam_vals).max())
    return MaterialField(
        samples=samples, x3_nodes=nodes, x3_weights=weights,
        is_x3_independent=x3_ind, is_layered=layered, is_isotropic=True,
        c1=c1, c2=c2, mu=mu_vals, lam=lam_vals, generator=generator, config=cfg,
    )


def material_from_config(cfg: dict) -> MaterialField:
    """Validate a configuration dictionary and sample the material field."""
    if not isinstance(cfg, dict):
        raise MaterialConfigError("material config must be a JSON object")
    kind, n1, n2, m = _common_config(cfg)
    nodes, weights = gauss_nodes_unit_interval(m)

    if kind == "isotropic_analytic":
        if "mu" not in cfg or "lambda" not in cfg:
            raise MaterialConfigError("isotropic_analytic requires 'mu' and 'lambda'")
        mu_expr = Expr(cfg["mu"])
        lam_expr = Expr(cfg["lambda"])
        x3_expr = Expr(cfg["x3_factor"]) if "x3_factor" in cfg else None
        y1, y2 = _grid_points(n1, n2)

        def generator(x3, g1, g2):
            x3 = np.asarray(x3, dtype=float)
            mu = mu_expr(g1, g2, x3)
            lam = lam_expr(g1, g2, x3)
            if x3_expr is not None:
                fac = x3_expr(g1, g2, x3)
                if fac.min() <= 0:
                    raise MaterialConfigError("x3_factor must stay positive on I")
                mu = mu * fac
                lam = lam * fac
            return isotropic_voigt(mu, lam)

        x3b = nodes[:, None, None]
        mu_vals = mu_expr(y1[None], y2[None], x3b)
        lam_vals = lam_expr(y1[None], y2[None], x3b)
        if x3_expr is not None:
            fac = x3_expr(y1[None], y2[None], x3b)
            if fac.min() <= 0:
                raise MaterialConfigError("x3_factor must stay positive on I")
            mu_vals = mu_vals * fac
            lam_vals = lam_vals * fac
        return _isotropic_field(mu_vals, lam_vals, nodes, weights, generator, cfg)

    if kind == "isotropic_layers":
        layers = cfg.get("layers")
        if (not isinstance(layers, list) or not layers
                or not all(isinstance(l, (list, tuple)) and len(l) == 3 for l in layers)):
            raise MaterialConfigError("'layers' must be a non-empty list of [width, mu, lambda]")
        widths = np.array([l[0] for l in layers], dtype=float)
        if widths.min() <= 0 or abs(widths.sum() - 1.0) > 1e-12:
            raise MaterialConfigError("layer widths must be positive and sum to 1")
        mus = np.array([l[1] for l in layers], dtype=float)
        lams = np.array([l[2] for l in layers], dtype=float)
        edges = np.concatenate([[0.0], np.cumsum(widths)])
        edges[-1] = 1.0

        def lookup(y):
            idx = np.clip(np.searchsorted(edges, np.mod(y, 1.0), side="right") - 1,
                          0, len(layers) - 1)
            return mus[idx], lams[idx]

        def generator(x3, g1, g2):
            mu, lam = lookup(np.asarray(g1, dtype=float))
            shape = np.broadcast(np.asarray(x3, dtype=float), mu, np.asarray(g2, dtype=float)).shape
            return isotropic_voigt(np.broadcast_to(mu, shape), np.broadcast_to(lam, shape))

        y1_mid, _ = _grid_points(n1, n2, midpoint=True)
        mu_g, lam_g = lookup(y1_mid)
        mu_vals = np.broadcast_to(mu_g, (m, n1, n2)).copy()
        lam_vals = np.broadcast_to(lam_g, (m, n1, n2)).copy()
        return _isotropic_field(mu_vals, lam_vals, nodes, weights, generator, cfg)

    # voigt_grid
    mats = cfg.get("matrices")
    try:
        samples = np.asarray(mats, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MaterialConfigError(f"'matrices' is not a numeric array: {exc}") from exc
    if samples.shape != (m, n1, n2, 6, 6):
        raise MaterialConfigError(
            f"'matrices' must have shape ({m}, {n1}, {n2}, 6, 6), got {samples.shape}")
    sym_err = np.abs(samples - np.swapaxes(samples, -1, -2)).max()
    if sym_err > 1e-12 * (1 + np.abs(samples).max()):
        raise MaterialConfigError("voigt_grid matrices must be symmetric")
    samples = 0.5 * (samples + np.swapaxes(samples, -1, -2))
    eigs = np.linalg.eigvalsh(samples)
    if eigs[..., 0].min() <= 0:
        raise MaterialConfigError("non-positive-definite sample in voigt_grid")
    x3_ind, layered = _verify_flags(samples)
    return MaterialField(
        samples=samples, x3_nodes=nodes, x3_weights=weights,
        is_x3_independent=x3_ind, is_layered=layered, is_isotropic=False,
        c1=float(eigs[..., 0].min()), c2=float(eigs[..., -1].max()),
        mu=None, lam=None, generator=None, config=cfg,
    )


def loads_material(text: str) -> MaterialField:
    """Parse a JSON config document and build the field."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MaterialConfigError(f"invalid JSON: {exc}") from exc
    return material_from_config(cfg)


def load_material(path) -> MaterialField:
    """Load a material field from a JSON config file."""
    with open(path, "r", encoding="utf-8") as handle:
        return loads_material(handle.read())
