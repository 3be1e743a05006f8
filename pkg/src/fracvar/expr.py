"""Small expression language for integrands and outer functions.

Expressions are parsed into immutable trees that can be evaluated on
scalars or numpy arrays and differentiated symbolically.  Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := number | name | name '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-v^2`` is ``-(v^2)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import special

FUNCTIONS = ("sqrt", "exp", "ln", "sin", "cos", "gamma")
CONSTANTS = {"pi": math.pi}

_BINARY = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_PRECEDENCE = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ExprError):
    def __init__(self, name, position):
        super().__init__(f"unknown identifier {name!r} at position {position}")
        self.name = name
        self.position = position


class DomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its real domain."""


@dataclass(frozen=True)
class Expr:
    kind: str
    children: tuple = ()
    value: float = 0.0
    name: str = ""

    def __str__(self):
        return to_text(self)

    def variables(self):
        if self.kind == "var":
            return frozenset([self.name])
        out = frozenset()
        for c in self.children:
            out |= c.variables()
        return out

    def is_const(self, value=None):
        return self.kind == "const" and (value is None or self.value == value)


def const(value):
    return Expr("const", value=float(value))


def var(name):
    return Expr("var", name=name)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {source[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, variables):
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, tok, pos = self.take()
        if tok != text:
            found = "end of input" if kind == "end" else repr(tok)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {tok!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Expr("add" if op == "+" else "sub", (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Expr("mul" if op == "*" else "div", (node, self.unary()))
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Expr("neg", (self.unary(),))
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Expr("pow", (base, self.unary()))
        return base

    def atom(self):
        kind, tok, pos = self.take()
        if kind == "num":
            return const(float(tok))
        if kind == "name":
            if tok in self.variables:
                return var(tok)
            if tok in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Expr("call", (arg,), name=tok)
            if tok in CONSTANTS:
                return const(CONSTANTS[tok])
            raise UnknownIdentifierError(tok, pos)
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(tok)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse_expression(source, variables):
    """Parse ``source`` into an :class:`Expr` over the declared ``variables``."""
    variables = list(variables)
    if len(set(variables)) != len(variables):
        raise ValueError(f"variables must be distinct: {variables}")
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, variables).parse()


# --------------------------------------------------------------- printing

def _num_text(x):
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def to_text(node):
    """Render ``node`` so that re-parsing gives an equivalent tree."""
    k = node.kind
    if k == "const":
        text = _num_text(node.value)
        return f"({text})" if node.value < 0 else text
    if k == "var":
        return node.name
    if k == "call":
        return f"{node.name}({to_text(node.children[0])})"
    if k == "neg":
        child = node.children[0]
        inner = to_text(child)
        if _PRECEDENCE.get(child.kind, 5) < _PRECEDENCE["pow"]:
            inner = f"({inner})"
        return "-" + inner
    left, right = node.children
    p = _PRECEDENCE[k]
    lt, rt = to_text(left), to_text(right)
    lp, rp = _PRECEDENCE.get(left.kind, 5), _PRECEDENCE.get(right.kind, 5)
    if k == "pow":
        # right operand may be a unary chain; the base must bind tighter than neg
        if lp <= p:
            lt = f"({lt})"
        if rp < p:
            rt = f"({rt})"
    else:
        if lp < p:
            lt = f"({lt})"
        # left-associative: same-precedence right operands need parentheses
        if rp < p or (rp == p and k in ("sub", "div", "add", "mul")):
            rt = f"({rt})"
    return f"{lt}{_BINARY[k]}{rt}"


# ------------------------------------------------------------ simplifying

def _add(a, b):
    if a.is_const(0):
        return b
    if b.is_const(0):
        return a
    if a.is_const() and b.is_const():
        return const(a.value + b.value)
    return Expr("add", (a, b))


def _sub(a, b):
    if b.is_const(0):
        return a
    if a.is_const(0):
        return _neg(b)
    if a.is_const() and b.is_const():
        return const(a.value - b.value)
    return Expr("sub", (a, b))


def _neg(a):
    if a.is_const():
        return const(-a.value)
    if a.kind == "neg":
        return a.children[0]
    return Expr("neg", (a,))


def _mul(a, b):
    if a.is_const(0) or b.is_const(0):
        return const(0)
    if a.is_const(1):
        return b
    if b.is_const(1):
        return a
    if a.is_const() and b.is_const():
        return const(a.value * b.value)
    return Expr("mul", (a, b))


def _div(a, b):
    if b.is_const(1):
        return a
    # 0/b is left alone unless b is a nonzero literal, so 0/0 still errors
    if a.is_const(0) and b.is_const() and b.value != 0:
        return const(0)
    if a.is_const(0) and not b.is_const():
        return const(0)
    if a.is_const() and b.is_const() and b.value != 0:
        return const(a.value / b.value)
    return Expr("div", (a, b))


def _pow(a, b):
    if b.is_const(0):
        return const(1)
    if b.is_const(1):
        return a
    if a.is_const() and b.is_const() and a.value > 0:
        return const(a.value ** b.value)
    return Expr("pow", (a, b))


def _call(name, a):
    return Expr("call", (a,), name=name)


# -------------------------------------------------------- differentiation

def differentiate(node, variable):
    """Exact partial derivative of ``node`` with respect to ``variable``.

    Only 0/1 identities and literal arithmetic are folded.
    """
    if variable not in node.variables():
        return const(0)
    k = node.kind
    if k == "var":
        return const(1)
    if k == "neg":
        return _neg(differentiate(node.children[0], variable))
    if k == "call":
        u = node.children[0]
        du = differentiate(u, variable)
        name = node.name
        if name == "sqrt":
            outer = _div(const(0.5), _call("sqrt", u))
        elif name == "exp":
            outer = _call("exp", u)
        elif name == "ln":
            outer = _div(const(1), u)
        elif name == "sin":
            outer = _call("cos", u)
        elif name == "cos":
            outer = _neg(_call("sin", u))
        else:
            raise ExprError("gamma() of a differentiated variable is not supported")
        return _mul(outer, du)
    u, w = node.children
    du, dw = differentiate(u, variable), differentiate(w, variable)
    if k == "add":
        return _add(du, dw)
    if k == "sub":
        return _sub(du, dw)
    if k == "mul":
        return _add(_mul(du, w), _mul(u, dw))
    if k == "div":
        return _sub(_div(du, w), _div(_mul(u, dw), _pow(w, const(2))))
    # pow
    if variable not in w.variables():
        return _mul(_mul(w, _pow(u, _sub(w, const(1)))), du)
    if variable not in u.variables():
        return _mul(_mul(node, _call("ln", u)), dw)
    return _mul(node, _add(_mul(dw, _call("ln", u)), _div(_mul(w, du), u)))


# ------------------------------------------------------------- evaluation

def _check(condition, message):
    if np.any(condition):
        raise DomainError(message)


def _is_integer(x):
    return np.all(np.asarray(x) == np.round(x))


def _eval(node, env):
    k = node.kind
    if k == "const":
        return node.value
    if k == "var":
        return env[node.name]
    if k == "neg":
        return -_eval(node.children[0], env)
    if k == "call":
        x = _eval(node.children[0], env)
        name = node.name
        if name == "sqrt":
            _check(np.asarray(x) < 0, "sqrt of a negative number")
            return np.sqrt(x)
        if name == "ln":
            _check(np.asarray(x) <= 0, "ln of a non-positive number")
            return np.log(x)
        if name == "gamma":
            xa = np.asarray(x)
            _check((xa <= 0) & (xa == np.round(xa)), "gamma pole")
            return special.gamma(x)
        return {"exp": np.exp, "sin": np.sin, "cos": np.cos}[name](x)
    a = _eval(node.children[0], env)
    b = _eval(node.children[1], env)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if k == "div":
        _check(np.asarray(b) == 0, "division by zero")
        return a / b
    base, expo = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    _check((base < 0) & (expo != np.round(expo)),
           "negative base raised to a non-integer power")
    _check((base == 0) & (expo < 0), "zero raised to a negative power")
    if _is_integer(b) and np.ndim(b) == 0 and abs(float(b)) <= 64:
        return a ** int(b) if float(b) >= 0 else 1.0 / (a ** int(-b))
    return np.power(base, expo)


def evaluate(node, bindings):
    """Evaluate ``node`` on scalar or array ``bindings``.

    Returns a float when every binding is scalar, otherwise an array.
    Raises :class:`DomainError` outside the real domain.
    """
    missing = node.variables() - set(bindings)
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")
    scalar = all(np.ndim(v) == 0 for v in bindings.values())
    env = {k: (float(v) if np.ndim(v) == 0 else np.asarray(v, float))
           for k, v in bindings.items()}
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    if scalar:
        return float(out)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values()))
    return np.broadcast_to(np.asarray(out, float), shape).copy()
