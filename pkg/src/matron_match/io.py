"""JSON instance, result and report files.

Floats are written with Python's shortest round-trip representation, so
every value reads back bit-for-bit.  Infinities are written as the strings
``"inf"`` and ``"-inf"``; NaN is never written.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from . import __version__
from .core import EquilibriumOutcome, MarketInstance, Matching
from .da import DAOptions
from .errors import SchemaError
from .grid import GridFunction
from .welfare import welfare_from_spec

INSTANCE_FORMAT = "matron-match/instance"
RESULT_FORMAT = "matron-match/result"
WELFARE_KINDS = ("logit", "quadratic", "grid")


def encode(obj: Any):
    """JSON-ready copy of ``obj``: arrays become lists, infinities become strings."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            raise ValueError("NaN cannot be serialized")
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def decode_number(x):
    if isinstance(x, bool):
        raise SchemaError("expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return float(x)
    if x in ("inf", "+inf", "Infinity"):
        return math.inf
    if x in ("-inf", "-Infinity"):
        return -math.inf
    raise SchemaError(f"expected a number, got {x!r}")


def decode_array(obj, ndim, name):
    """Nested list of numbers (or inf strings) to a float array of rank ``ndim``."""
    def conv(v, depth):
        if depth == 0:
            return decode_number(v)
        if not isinstance(v, list):
            raise SchemaError(f"{name} must be a rank-{ndim} array")
        return [conv(e, depth - 1) for e in v]

    data = conv(obj, ndim)
    try:
        arr = np.array(data, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{name} is ragged") from exc
    if ndim == 2 and len(data) == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != ndim:
        raise SchemaError(f"{name} must be a rank-{ndim} array")
    return arr


def dumps(doc) -> str:
    return json.dumps(encode(doc), indent=2, allow_nan=False) + "\n"


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc})") from exc


def _require(doc, key, name="document"):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"{name} is missing field {key!r}")
    return doc[key]


def _matrix(doc, key, shape, optional=False):
    if optional and key not in doc:
        return None
    arr = decode_array(_require(doc, key), 2, key)
    if shape[0] * shape[1] == 0 and arr.size == 0:
        return np.zeros(shape)
    if arr.shape != shape:
        raise SchemaError(f"{key} has shape {arr.shape}, expected {shape}")
    return arr


class Instance:
    """A parsed instance file: market, welfare specs and solver options."""

    def __init__(self, market: MarketInstance, welfare_g: dict, welfare_h: dict, options: DAOptions):
        self.market = market
        self.welfare_g = welfare_g
        self.welfare_h = welfare_h
        self.options = options

    def welfares(self):
        mk = self.market
        G = welfare_from_spec(self.welfare_g, "x", mk.n, mk.m, reservation=mk.alpha_x0)
        H = welfare_from_spec(self.welfare_h, "y", mk.n, mk.m, reservation=mk.gamma_0y)
        return G, H

    def to_dict(self):
        mk = self.market
        return {
            "format": INSTANCE_FORMAT,
            "shape": list(mk.shape),
            "types_x": list(mk.types_x),
            "types_y": list(mk.types_y),
            "n": mk.n, "m": mk.m,
            "alpha": mk.alpha, "gamma": mk.gamma,
            "alpha_x0": mk.alpha_x0, "gamma_0y": mk.gamma_0y,
            "welfare_g": self.welfare_g, "welfare_h": self.welfare_h,
            "options": options_to_dict(self.options),
        }


def options_to_dict(opts: DAOptions):
    return {"tol_stop": opts.tol_stop, "max_iter": int(opts.max_iter),
            "update_rule": opts.update_rule, "seed": int(opts.seed)}


def _welfare_spec(doc, name, reservation):
    if not isinstance(doc, dict) or doc.get("kind") not in WELFARE_KINDS:
        raise SchemaError(f"{name}.kind must be one of {WELFARE_KINDS}")
    if doc["kind"] == "quadratic" and "A" not in doc:
        raise SchemaError(f"{name} of kind quadratic needs a matrix A")
    if doc["kind"] == "grid" and "conjugate" not in doc:
        raise SchemaError(f"{name} of kind grid needs a conjugate grid function")
    if doc["kind"] != "logit" and np.any(reservation != 0):
        raise SchemaError(f"{name}: reservation utilities are only supported for logit welfare")
    return doc


def parse_instance(doc) -> Instance:
    if not isinstance(doc, dict):
        raise SchemaError("instance must be a JSON object")
    n = decode_array(_require(doc, "n"), 1, "n")
    m = decode_array(_require(doc, "m"), 1, "m")
    shape = (n.size, m.size)
    if "shape" in doc and list(doc["shape"]) != list(shape):
        raise SchemaError(f"shape {doc['shape']} disagrees with the mass vectors {list(shape)}")
    alpha = _matrix(doc, "alpha", shape)
    gamma = _matrix(doc, "gamma", shape)
    a0 = decode_array(doc["alpha_x0"], 1, "alpha_x0") if "alpha_x0" in doc else None
    g0 = decode_array(doc["gamma_0y"], 1, "gamma_0y") if "gamma_0y" in doc else None
    try:
        market = MarketInstance.from_arrays(n, m, alpha, gamma, a0, g0,
                                            doc.get("types_x"), doc.get("types_y"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    wg = _welfare_spec(_require(doc, "welfare_g"), "welfare_g", market.alpha_x0)
    wh = _welfare_spec(_require(doc, "welfare_h"), "welfare_h", market.gamma_0y)
    raw = doc.get("options", {}) or {}
    if not isinstance(raw, dict):
        raise SchemaError("options must be an object")
    unknown = set(raw) - {"tol_stop", "max_iter", "update_rule", "seed"}
    if unknown:
        raise SchemaError(f"unknown options {sorted(unknown)}")
    try:
        opts = DAOptions(**raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"invalid options: {exc}") from exc
    return Instance(market, wg, wh, opts)


def load_instance(path) -> Instance:
    return parse_instance(load_json(path))


def result_document(out: EquilibriumOutcome, trace, verified, report, opts: DAOptions):
    return {
        "format": RESULT_FORMAT,
        "version": __version__,
        "seed": int(opts.seed),
        "shape": list(out.mu.mu.shape),
        "mu": out.mu.mu,
        "mu_x0": out.mu.mu_x0,
        "mu_0y": out.mu.mu_0y,
        "U": out.U,
        "V": out.V,
        "tau_alpha": out.tau_alpha,
        "tau_gamma": out.tau_gamma,
        "residuals": {
            "stop": trace.residuals[-1] if trace.residuals else 0.0,
            "no_blocking": report.no_blocking if report else None,
            "fenchel_g": report.fenchel_g if report else None,
            "fenchel_h": report.fenchel_h if report else None,
        },
        "iterations": trace.iterations,
        "converged": bool(trace.converged),
        "verified": bool(verified),
        "options": options_to_dict(opts),
    }


def parse_result(doc) -> EquilibriumOutcome:
    if not isinstance(doc, dict):
        raise SchemaError("result must be a JSON object")
    mu = decode_array(_require(doc, "mu", "result"), 2, "mu")
    shape = tuple(doc.get("shape", mu.shape))
    if mu.size == 0:
        mu = np.zeros(shape)
    fields = {}
    for key in ("U", "V", "tau_alpha", "tau_gamma"):
        fields[key] = _matrix(doc, key, mu.shape)
    try:
        match = Matching(mu, decode_array(_require(doc, "mu_x0"), 1, "mu_x0"),
                         decode_array(_require(doc, "mu_0y"), 1, "mu_0y"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    return EquilibriumOutcome(match, fields["U"], fields["V"], fields["tau_alpha"],
                              fields["tau_gamma"], {})


def _axis(spec, name):
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{name}: axis objects need start, stop and num") from exc
    return decode_array(spec, 1, name)


def parse_axes(spec, name="axes"):
    if not isinstance(spec, list) or not spec:
        raise SchemaError(f"{name} must be a non-empty list of axes")
    return tuple(_axis(a, f"{name}[{i}]") for i, a in enumerate(spec))


def parse_grid_function(doc, name="function") -> GridFunction:
    """Grid function from a document.

    Accepted forms: explicit ``{"axes", "values"}`` (C order), ``{"kind":
    "quadratic", "A", "axes"}`` for ``q'Aq/2`` and ``{"kind": "indicator",
    "axes", "members"}``.  Axes may be listed or given as ``{"start", "stop",
    "num"}``.
    """
    if not isinstance(doc, dict):
        raise SchemaError(f"{name} must be an object")
    axes = parse_axes(_require(doc, "axes", name), f"{name}.axes")
    kind = doc.get("kind", "table")
    convex = bool(doc.get("convex", False))
    try:
        if kind == "table":
            vals = np.array([decode_number(v) if v is not None else math.inf
                             for v in _require(doc, "values", name)], dtype=float)
            return GridFunction(axes, vals.reshape(tuple(a.size for a in axes)), convex=convex)
        if kind == "quadratic":
            A = decode_array(_require(doc, "A", name), 2, f"{name}.A")
            if A.shape != (len(axes), len(axes)):
                raise SchemaError(f"{name}.A must be {len(axes)}x{len(axes)}")
            return GridFunction.from_callable(lambda q: 0.5 * q @ A @ q, axes, convex=convex)
        if kind == "indicator":
            members = decode_array(_require(doc, "members", name), 2, f"{name}.members")
            return GridFunction.indicator(axes, members)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(f"{name}: {exc}") from exc
    raise SchemaError(f"{name}: unknown grid function kind {kind!r}")
