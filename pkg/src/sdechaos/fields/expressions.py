"""User-defined coefficient fields from component-wise expression strings.

Expressions are parsed with :mod:`ast` and evaluated against a whitelist of
numpy functions, so loading a field definition from a config file never
executes arbitrary code. Variables: ``x1 .. xd`` (coordinates) and ``r``
(the Euclidean norm |x|).
"""

from __future__ import annotations

import ast
import math

import numpy as np

from .core import CoefficientField, FieldError

__all__ = ["compile_expression", "field_from_expressions"]

_FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "atan2": np.arctan2,
    "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh, "sign": np.sign,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power, ast.Mod: np.mod,
}
_UNARYOPS = {ast.UAdd: lambda v: v, ast.USub: np.negative}


def _check(node, names):
    if isinstance(node, ast.Expression):
        _check(node.body, names)
    elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check(node.left, names)
        _check(node.right, names)
    elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNARYOPS:
        _check(node.operand, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise FieldError(f"call to disallowed function in expression: {ast.dump(node)}")
        if node.keywords:
            raise FieldError("keyword arguments are not allowed in field expressions")
        for arg in node.args:
            _check(arg, names)
    elif isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTANTS:
            raise FieldError(f"unknown variable {node.id!r} in field expression")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise FieldError(f"non-numeric constant {node.value!r}")
    else:
        raise FieldError(f"disallowed syntax in field expression: {type(node).__name__}")


def compile_expression(text, d):
    """Compile one closed-form string into a vectorized function of (N, d) points."""
    names = {f"x{i + 1}" for i in range(d)} | {"r"}
    tree = ast.parse(text, mode="eval")
    _check(tree, names)

    def evaluate(node, env):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, env), evaluate(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARYOPS[type(node.op)](evaluate(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCTIONS[node.func.id](*[evaluate(a, env) for a in node.args])
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTANTS[node.id]
        if isinstance(node, ast.Constant):
            return float(node.value)
        raise AssertionError("unreachable: expression was validated")

    def func(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {f"x{i + 1}": x[:, i] for i in range(d)}
        env["r"] = np.linalg.norm(x, axis=1)
        out = evaluate(tree, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()

    return func


def field_from_expressions(d, d1, sigma_exprs, drift_exprs=None, delta=0.9,
                           smoothness="analytic-smooth", singular_points=(),
                           params=None):
    """Build a user-defined field from a d x d1 table of expression strings.

    Parameters
    ----------
    sigma_exprs : sequence of d rows, each a sequence of d1 strings
    drift_exprs : sequence of d strings, optional (defaults to zero drift)
    """
    sigma_exprs = [list(row) for row in sigma_exprs]
    if len(sigma_exprs) != d or any(len(row) != d1 for row in sigma_exprs):
        raise FieldError(f"sigma expression table must be {d} x {d1}")
    sig_funcs = [[compile_expression(expr, d) for expr in row] for row in sigma_exprs]
    if drift_exprs is None:
        drift_exprs = ["0"] * d
    if len(drift_exprs) != d:
        raise FieldError(f"drift expression table must have {d} entries")
    drift_funcs = [compile_expression(expr, d) for expr in drift_exprs]

    def sigma(x):
        out = np.empty((x.shape[0], d, d1))
        for i in range(d):
            for k in range(d1):
                out[:, i, k] = sig_funcs[i][k](x)
        return out

    def drift(x):
        out = np.empty((x.shape[0], d))
        for i in range(d):
            out[:, i] = drift_funcs[i](x)
        return out

    return CoefficientField(
        "user-defined", d, d1, sigma, drift,
        smoothness=smoothness, delta=delta,
        singular_points=tuple(tuple(p) for p in singular_points),
        params={**(params or {}), "sigma_exprs": sigma_exprs, "drift_exprs": list(drift_exprs)},
    )
