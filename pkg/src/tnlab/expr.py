"""Closed-vocabulary arithmetic expressions read from config files.

Expressions are parsed with :mod:`ast` and checked against a whitelist, so a
compiled expression is always a finite composition of continuous
primitives and can be written back verbatim.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np


class ExprError(ValueError):
    """Raised when an expression leaves the allowed vocabulary."""


def _min(*a):
    return np.minimum.reduce(np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in a]))


def _max(*a):
    return np.maximum.reduce(np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in a]))


_CONTINUOUS = {"min": _min, "max": _max, "abs": np.abs}
_ENVELOPE = dict(_CONTINUOUS, exp=np.exp, sqrt=np.sqrt)
_DATA = dict(_ENVELOPE, sin=np.sin, cos=np.cos, tanh=np.tanh, where=np.where,
             sign=np.sign, heaviside=lambda x: np.where(np.asarray(x) > 0, 1.0, 0.0))

VOCABULARIES = {
    "flux": (("beta", "sigma", "omega"), _CONTINUOUS, False),
    "envelope": (("r", "s"), _ENVELOPE, False),
    "data": (("x", "t"), _DATA, True),
}
_CONSTANTS = {"pi": np.pi, "e": np.e}


@dataclass(frozen=True)
class Expr:
    """Compiled expression over a fixed set of variable names."""

    source: str
    vocabulary: str
    _code: object = field(repr=False, compare=False, default=None)

    def __call__(self, **kw):
        names, funcs, _ = VOCABULARIES[self.vocabulary]
        env = {n: np.asarray(kw.get(n, 0.0), dtype=float) for n in names}
        env.update(funcs)
        env.update(_CONSTANTS)
        out = eval(self._code, {"__builtins__": {}}, env)  # noqa: S307 (whitelisted AST)
        shape = np.broadcast(*env_values(kw, names)).shape
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    @property
    def is_zero(self) -> bool:
        try:
            return float(ast.literal_eval(self.source.strip())) == 0.0
        except (ValueError, SyntaxError):
            return False

    def uses(self, name: str) -> bool:
        return any(isinstance(n, ast.Name) and n.id == name
                   for n in ast.walk(ast.parse(self.source, mode="eval")))


def env_values(kw, names):
    vals = [np.asarray(kw[n], dtype=float) for n in names if n in kw]
    return vals or [np.asarray(0.0)]


def _is_const(node) -> bool:
    if isinstance(node, ast.Constant):
        return True
    if isinstance(node, ast.Name):
        return node.id in _CONSTANTS
    if isinstance(node, ast.UnaryOp):
        return _is_const(node.operand)
    if isinstance(node, ast.BinOp):
        return _is_const(node.left) and _is_const(node.right)
    return False


def compile_expr(source, vocabulary: str) -> Expr:
    """Parse ``source`` and reject anything outside ``vocabulary``."""
    if isinstance(source, (int, float)):
        source = repr(float(source))
    if not isinstance(source, str):
        raise ExprError(f"expression must be a string, got {type(source).__name__}")
    names, funcs, discontinuous = VOCABULARIES[vocabulary]
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse expression {source!r}: {exc.msg}") from None
    ops = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)
    cmp_ops = (ast.Lt, ast.LtE, ast.Gt, ast.GtE)
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load, ast.Constant) + ops):
            continue
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Div) and not _is_const(node.right) and not discontinuous:
                raise ExprError(f"division by a non-constant in {source!r}")
            if isinstance(node.op, ast.Pow) and not _is_const(node.right):
                raise ExprError(f"non-constant exponent in {source!r}")
            continue
        if isinstance(node, ast.UnaryOp):
            continue
        if isinstance(node, ast.Name):
            if node.id in names or node.id in funcs or node.id in _CONSTANTS:
                continue
            raise ExprError(f"unknown name {node.id!r} in {source!r} (allowed: {', '.join(names)})")
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in funcs) or node.keywords:
                raise ExprError(f"call not allowed in {source!r}")
            continue
        if isinstance(node, ast.Compare) and discontinuous:
            if all(isinstance(o, cmp_ops) for o in node.ops):
                continue
        if isinstance(node, cmp_ops) and discontinuous:
            continue
        raise ExprError(f"construct {type(node).__name__} not allowed in {source!r}")
    if isinstance(tree.body, ast.Constant) and not isinstance(tree.body.value, (int, float)):
        raise ExprError(f"constant must be numeric in {source!r}")
    code = compile(tree, "<expr>", "eval")
    return Expr(source, vocabulary, code)
