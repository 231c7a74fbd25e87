"""Safe evaluator for user-written flag expressions.

The grammar is the arithmetic/comparison/boolean subset: identifiers
(`x` is the target variable, other names are companion variables aligned
by exact timestamp), numeric literals, + - * /, the six comparisons,
and/or/not, parentheses.  Parsing rides on Python's ast module with a
strict node whitelist; evaluation is vectorized over the target's
timestamps.

A point whose expression references a companion value that does not
exist at that exact timestamp evaluates to False (missing data never
flags anything).
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExprSyntaxError, UnknownVariable

_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare,
    ast.Name, ast.Constant, ast.Load,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.USub, ast.UAdd,
    ast.And, ast.Or, ast.Not,
    ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)

def _is_boolean_node(node) -> bool:
    if isinstance(node, (ast.Compare, ast.BoolOp)):
        return True
    return isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not)


def parse_expr(text: str) -> ast.Expression:
    """Parse and whitelist-check an expression; the result must be boolean."""
    try:
        tree = ast.parse(text, mode="eval")
    except (SyntaxError, ValueError) as exc:
        raise ExprSyntaxError(f"bad expression {text!r}: {exc}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ExprSyntaxError(
                f"bad expression {text!r}: {type(node).__name__} not allowed")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExprSyntaxError(
                f"bad expression {text!r}: only numeric literals allowed")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            if not _is_boolean_node(node.operand):
                raise ExprSyntaxError(
                    f"bad expression {text!r}: 'not' needs a boolean operand")
        if isinstance(node, ast.BoolOp):
            for operand in node.values:
                if not _is_boolean_node(operand):
                    raise ExprSyntaxError(
                        f"bad expression {text!r}: and/or need boolean operands")
    if not _is_boolean_node(tree.body):
        raise ExprSyntaxError(
            f"bad expression {text!r}: must be a comparison or boolean expression")
    return tree


def expr_variables(tree: ast.Expression) -> set:
    return {node.id for node in ast.walk(tree) if isinstance(node, ast.Name)}


class _Evaluator:
    def __init__(self, resolve, n):
        self.resolve = resolve
        self.n = n
        self.valid = np.ones(n, dtype=np.bool_)

    def eval(self, node):
        if isinstance(node, ast.Constant):
            return np.full(self.n, float(node.value))
        if isinstance(node, ast.Name):
            values, present = self.resolve(node.id)
            self.valid &= present
            return values
        if isinstance(node, ast.BinOp):
            left = self.eval(node.left)
            right = self.eval(node.right)
            with np.errstate(divide="ignore", invalid="ignore"):
                if isinstance(node.op, ast.Add):
                    return left + right
                if isinstance(node.op, ast.Sub):
                    return left - right
                if isinstance(node.op, ast.Mult):
                    return left * right
                # division by zero invalidates the point (never flags)
                self.valid &= right != 0
                return left / right
        if isinstance(node, ast.UnaryOp):
            operand = self.eval(node.operand)
            if isinstance(node.op, ast.Not):
                return ~operand.astype(np.bool_)
            if isinstance(node.op, ast.USub):
                return -operand
            return operand
        if isinstance(node, ast.Compare):
            result = np.ones(self.n, dtype=np.bool_)
            left = self.eval(node.left)
            with np.errstate(invalid="ignore"):
                for op, comparator in zip(node.ops, node.comparators):
                    right = self.eval(comparator)
                    if isinstance(op, ast.Lt):
                        result &= left < right
                    elif isinstance(op, ast.LtE):
                        result &= left <= right
                    elif isinstance(op, ast.Gt):
                        result &= left > right
                    elif isinstance(op, ast.GtE):
                        result &= left >= right
                    elif isinstance(op, ast.Eq):
                        result &= left == right
                    else:
                        result &= left != right
                    left = right
            return result
        if isinstance(node, ast.BoolOp):
            parts = [self.eval(v).astype(np.bool_) for v in node.values]
            result = parts[0]
            for part in parts[1:]:
                result = (result & part) if isinstance(node.op, ast.And) else (result | part)
            return result
        raise ExprSyntaxError(f"unexpected node {type(node).__name__}")  # unreachable


def evaluate(tree: ast.Expression, target_ts: np.ndarray, target_vs: np.ndarray,
             companions: dict) -> np.ndarray:
    """Boolean hit-vector over the target points.

    companions maps variable name -> (timestamps, values); lookups align
    by exact timestamp, missing counterparts force False at that point.
    """
    n = len(target_ts)

    def resolve(name):
        if name == "x":
            return target_vs.astype(np.float64), np.ones(n, dtype=np.bool_)
        if name not in companions:
            raise UnknownVariable(name)
        comp_ts, comp_vs = companions[name]
        values = np.full(n, np.nan)
        present = np.zeros(n, dtype=np.bool_)
        if len(comp_ts):
            idx = np.searchsorted(comp_ts, target_ts)
            idx_c = np.minimum(idx, len(comp_ts) - 1)
            hit = comp_ts[idx_c] == target_ts
            values[hit] = comp_vs[idx_c[hit]]
            present = hit & ~np.isnan(values)  # NaN counterparts count as missing
        return values, present

    ev = _Evaluator(resolve, n)
    result = ev.eval(tree.body).astype(np.bool_)
    return result & ev.valid
