"""
This module parses magnetic field expressions into `sympy` expressions.

Grammar (EBNF), whitespace insignificant:

    expression = term , { ("+" | "-") , term } ;
    term       = factor , { ("*" | "/") , factor } ;
    factor     = ("+" | "-") , factor | power ;
    power      = atom , [ ("^" | "**") , factor ] ;
    atom       = number | name | call | "(" , expression , ")" ;
    call       = function , "(" , expression , ")" ;
    function   = "sqrt" | "sin" | "cos" | "tan" | "exp" | "log" ;
    name       = "x" | "y" | "r" | "pi" | parameter ;

`r` is |q| = sqrt(x^2 + y^2). Parameters are named constants supplied alongside
the expression (e.g. `alpha` in "alpha*(r-2)/(r-1)^2").

Parsing goes through Python's `ast` on a copy of the text with "^" replaced by
"**"; only the node types of the grammar above are translated, everything else
is rejected with its position in the original text.
"""

import ast
from typing import Mapping, Optional

import sympy as sp

x, y, r = sp.symbols("x y r", real=True)

FUNCTIONS = {
    "sqrt": sp.sqrt,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "exp": sp.exp,
    "log": sp.log,
}

_BINARY = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    """Field expression could not be parsed. `position` is the 0-based index of
    the offending character in the original expression."""

    def __init__(self, message: str, expression: str, position: int):
        self.expression = expression
        self.position = max(0, min(position, len(expression)))
        pointer = " " * self.position + "^"
        super().__init__(
            f"{message} at position {self.position}\n  {expression}\n  {pointer}"
        )


def _original_position(text: str, offset: int) -> int:
    """Map a column in the '^'->'**' rewritten text back to the original."""
    original, rewritten = 0, 0
    while rewritten < offset and original < len(text):
        rewritten += 2 if text[original] == "^" else 1
        original += 1
    return original


def exact_number(value: float) -> sp.Expr:
    """Decimal-exact rational for a float literal (0.1 -> 1/10)."""
    return sp.Rational(repr(float(value))) if float(value) != int(value) else sp.Integer(int(value))


class _Translator:
    def __init__(self, text: str, parameters: Mapping[str, float]):
        self.text = text
        self.names = {"x": x, "y": y, "r": r, "pi": sp.pi}
        for name, value in parameters.items():
            if name in self.names or name in FUNCTIONS:
                raise ValueError(f"Parameter name {name!r} is reserved")
            self.names[name] = exact_number(value)

    def fail(self, message: str, node: ast.AST):
        column = getattr(node, "col_offset", 0)
        raise ExpressionError(message, self.text, _original_position(self.text, column))

    def visit(self, node: ast.AST) -> sp.Expr:
        if isinstance(node, ast.Expression):
            return self.visit(node.body)

        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self.fail("Unsupported literal", node)
            return exact_number(node.value)

        if isinstance(node, ast.Name):
            if node.id not in self.names:
                self.fail(f"Unknown name {node.id!r}", node)
            return self.names[node.id]

        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            operand = self.visit(node.operand)
            return -operand if isinstance(node.op, ast.USub) else operand

        if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
            return _BINARY[type(node.op)](self.visit(node.left), self.visit(node.right))

        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name):
                self.fail("Unsupported call", node)
            name = node.func.id
            if name not in FUNCTIONS:
                self.fail(f"Unsupported function {name!r}", node)
            if node.keywords or len(node.args) != 1:
                self.fail(f"Function {name!r} takes exactly one argument", node)
            return FUNCTIONS[name](self.visit(node.args[0]))

        self.fail(f"Unsupported syntax ({type(node).__name__})", node)


def parse_expression(
    expression: str, parameters: Optional[Mapping[str, float]] = None
) -> sp.Expr:
    """Parse a field expression into a sympy expression in the symbols x, y, r.

    :param expression: Expression text, e.g. "1/(1-r) + 7*y + 5*x^2"
    :type expression: str
    :param parameters: Named constants, defaults to None
    :type parameters: Mapping[str, float], optional

    :returns: Parsed expression
    :rtype: sympy.Expr
    """

    if not expression or not expression.strip():
        raise ExpressionError("Empty expression", expression or "", 0)

    rewritten = expression.replace("^", "**")
    try:
        tree = ast.parse(rewritten.strip(), mode="eval")
    except SyntaxError as exc:
        leading = len(rewritten) - len(rewritten.lstrip())
        column = leading + max((exc.offset or 1) - 1, 0)
        raise ExpressionError(
            f"Syntax error ({exc.msg})",
            expression,
            _original_position(expression, column),
        ) from None

    leading = len(rewritten) - len(rewritten.lstrip())
    for node in ast.walk(tree):
        if hasattr(node, "col_offset"):
            node.col_offset += leading

    return _Translator(expression, parameters or {}).visit(tree)
