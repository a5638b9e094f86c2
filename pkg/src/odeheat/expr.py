"""Arithmetic expressions for potentials and initial data in config files.

Grammar: numbers, ``pi``, the variables ``x`` and ``t``, the functions
``sin``, ``cos``, ``exp``, binary ``+ - * / ^`` and unary minus.  ``^`` is
exponentiation.  Parsing goes through :mod:`ast` with a node whitelist; no
Python evaluation is ever performed.
"""

import ast
import operator

import numpy as np


class ExpressionError(ValueError):
    pass


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": np.pi}
VARIABLES = ("x", "t")


class Expression:
    """A parsed expression, callable as ``expr(x=..., t=...)``."""

    def __init__(self, source):
        if isinstance(source, (int, float)):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ExpressionError(f"expression must be a string or number, got {type(source).__name__}")
        self.source = source
        try:
            tree = ast.parse(source.replace("^", "**").strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body
        self.variables = sorted({n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in VARIABLES})

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"unsupported literal {node.value!r} in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in VARIABLES and node.id not in _CONSTS:
                raise ExpressionError(f"unknown identifier {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS) or node.keywords or len(node.args) != 1:
                raise ExpressionError(f"only sin, cos, exp of one argument are allowed in {self.source!r}")
            self._check(node.args[0])
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](self._eval(node.operand, env))
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, x=0.0, t=0.0):
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, {"x": np.asarray(x, dtype=float), "t": np.asarray(t, dtype=float)})
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    def __repr__(self):
        return f"Expression({self.source!r})"


def parse(source) -> Expression:
    return Expression(source)
