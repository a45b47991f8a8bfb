"""Operator expression language.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary ('*' unary)*
    unary   := '-' unary | factor
    factor  := scalar | call | 'adj' '(' expr ')' | 'pow' '(' expr ',' INT ')'
             | '(' expr ')'
    call    := NAME ['(' [arg (',' arg)*] ')']
    scalar  := NUMBER ['i'] | 'i'

Generator arguments use the same grammar with variables ``x1 .. xd``
allowed; constant arguments evaluate to complex numbers and arguments with
variables to sphere polynomials (for ``angular``).
"""

import re
from dataclasses import dataclass

from .errors import ParseError
from .models import SpherePolynomial
from .oracles import Identity, MatrixOracle

# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Gen:
    name: str
    args: tuple


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Adj:
    operand: object


@dataclass(frozen=True)
class Pow:
    operand: object
    exponent: int


# ---------------------------------------------------------------- tokens


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IMAG, NAME, OP, END
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*(),])"
)

RESERVED = {"adj", "pow", "i"}
_VAR_RE = re.compile(r"x([1-9][0-9]*)$")


def tokenize(src):
    tokens, pos, line, col = [], 0, 1, 1
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        kind, text = m.lastgroup, m.group()
        if kind == "nl":
            line, col, pos = line + 1, 1, m.end()
            continue
        if kind == "num":
            end = m.end()
            if end < len(src) and src[end] == "i" and not (
                end + 1 < len(src) and (src[end + 1].isalnum() or src[end + 1] == "_")
            ):
                tokens.append(Token("IMAG", text, line, col))
                m_end = end + 1
                col += m_end - pos
                pos = m_end
                continue
            if end < len(src) and (src[end].isalpha() or src[end] == "_"):
                raise ParseError(f"malformed number near {src[pos:end + 1]!r}", line, col)
            tokens.append(Token("NUM", text, line, col))
        elif kind == "name":
            tokens.append(Token("NAME", text, line, col))
        elif kind == "op":
            tokens.append(Token("OP", text, line, col))
        col += m.end() - pos
        pos = m.end()
    tokens.append(Token("END", "", line, col))
    return tokens


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, src, generators=None):
        self.tokens = tokenize(src)
        self.pos = 0
        self.generators = generators
        self.in_arg = 0

    @property
    def tok(self):
        return self.tokens[self.pos]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, text):
        if self.tok.kind != "OP" or self.tok.text != text:
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        self.pos += 1

    def accept(self, text):
        if self.tok.kind == "OP" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def parse(self):
        if self.tok.kind == "END":
            self.error("empty expression")
        node = self.expr()
        if self.tok.kind != "END":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            if self.accept("+"):
                node = Add(node, self.term())
            elif self.accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while self.accept("*"):
            node = Mul(node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.factor()

    def factor(self):
        tok = self.tok
        if tok.kind == "NUM":
            self.pos += 1
            return Num(complex(float(tok.text), 0.0))
        if tok.kind == "IMAG":
            self.pos += 1
            return Num(complex(0.0, float(tok.text)))
        if tok.kind == "OP" and tok.text == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "NAME":
            return self.name()
        self.error(f"unexpected {tok.text or 'end of input'!r}")

    def name(self):
        tok = self.tok
        self.pos += 1
        name = tok.text
        if name == "i":
            return Num(1j)
        if name == "adj":
            if self.in_arg:
                self.error("adj is not allowed inside generator arguments", tok)
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return Adj(node)
        if name == "pow":
            self.expect("(")
            node = self.expr()
            self.expect(",")
            exp_tok = self.tok
            if exp_tok.kind != "NUM" or not exp_tok.text.isdigit():
                self.error("pow exponent must be a non-negative integer")
            self.pos += 1
            self.expect(")")
            return Pow(node, int(exp_tok.text))
        var = _VAR_RE.match(name)
        if var:
            if not self.in_arg:
                self.error(f"variable {name} outside a generator argument", tok)
            return Var(int(var.group(1)))
        if self.in_arg:
            self.error(f"unknown symbol {name!r} in generator argument", tok)
        args = []
        if self.accept("("):
            self.in_arg += 1
            if not self.accept(")"):
                args.append(self.expr())
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
            self.in_arg -= 1
        self.check_generator(name, len(args), tok)
        return Gen(name, tuple(args))

    def check_generator(self, name, nargs, tok):
        if self.generators is None:
            return
        spec = self.generators.get(name)
        if spec is None:
            self.error(f"unknown generator {name!r} for this model", tok)
        lo, hi = spec
        if nargs < lo or (hi is not None and nargs > hi):
            want = str(lo) if lo == hi else f"{lo}..{'' if hi is None else hi}"
            self.error(f"generator {name} takes {want} arguments, got {nargs}", tok)


def parse(src, model=None):
    """Parse ``src`` into an AST; with ``model``, generator names and arities
    are checked against it."""
    if not isinstance(src, str):
        raise ParseError("expression must be text")
    return _Parser(src, None if model is None else model.GENERATORS).parse()


# ---------------------------------------------------------------- printer


def _real_text(x):
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _num_text(z):
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        return _real_text(z.real)
    if z.real == 0 and z.imag >= 0:
        return _real_text(z.imag) + "i"
    raise ValueError(f"literal {z} has no single-token form")


_PREC = {Add: 1, Sub: 1, Mul: 2, Neg: 3}


def pretty(node, prec=0):
    """Text that parses back to ``node``."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Gen):
        if not node.args:
            return node.name
        return f"{node.name}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, Adj):
        return f"adj({pretty(node.operand)})"
    if isinstance(node, Pow):
        return f"pow({pretty(node.operand)}, {node.exponent})"
    if isinstance(node, (Add, Sub)):
        op = "+" if isinstance(node, Add) else "-"
        text = f"{pretty(node.left, 1)} {op} {pretty(node.right, 2)}"
        return f"({text})" if prec > 1 else text
    if isinstance(node, Mul):
        text = f"{pretty(node.left, 2)} * {pretty(node.right, 3)}"
        return f"({text})" if prec > 2 else text
    if isinstance(node, Neg):
        text = f"-{pretty(node.operand, 3)}"
        return f"({text})" if prec > 3 else text
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------- compiler


def _arg_value(node, dim):
    """Constant argument -> complex; with variables -> SpherePolynomial."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.index > dim:
            raise ParseError(f"variable x{node.index} exceeds dimension {dim}")
        return SpherePolynomial.coordinate(dim, node.index - 1)
    if isinstance(node, Pow):
        base = _arg_value(node.operand, dim)
        if isinstance(base, SpherePolynomial):
            return base.power(node.exponent)
        return base**node.exponent
    if isinstance(node, Neg):
        v = _arg_value(node.operand, dim)
        return v.scale(-1) if isinstance(v, SpherePolynomial) else -v
    if isinstance(node, (Add, Sub, Mul)):
        a, b = _arg_value(node.left, dim), _arg_value(node.right, dim)
        if isinstance(node, Sub):
            b = b.scale(-1) if isinstance(b, SpherePolynomial) else -b
        if not isinstance(a, SpherePolynomial) and not isinstance(b, SpherePolynomial):
            return a * b if isinstance(node, Mul) else a + b
        a = a if isinstance(a, SpherePolynomial) else SpherePolynomial.constant(dim, a)
        b = b if isinstance(b, SpherePolynomial) else SpherePolynomial.constant(dim, b)
        return a * b if isinstance(node, Mul) else a + b
    raise ParseError(f"invalid generator argument {node!r}")


def _compile(node, model):
    # returns a complex constant or a MatrixOracle
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Gen):
        args = [_arg_value(a, model.lattice_dim) for a in node.args]
        op = model.generator(node.name, args)
        op.label = op.key = pretty(node)
        return op
    if isinstance(node, Var):
        raise ParseError(f"variable x{node.index} outside a generator argument")
    if isinstance(node, Neg):
        v = _compile(node.operand, model)
        return -v
    if isinstance(node, Adj):
        v = _compile(node.operand, model)
        return v.adjoint() if isinstance(v, MatrixOracle) else complex(v).conjugate()
    if isinstance(node, Pow):
        v = _compile(node.operand, model)
        return v.power(node.exponent) if isinstance(v, MatrixOracle) else v**node.exponent
    a, b = _compile(node.left, model), _compile(node.right, model)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    raise TypeError(f"not an expression node: {node!r}")


def compile_expr(node, model):
    """Compile an AST to a :class:`MatrixOracle` on ``model``."""
    out = _compile(node, model)
    if not isinstance(out, MatrixOracle):
        out = complex(out) * Identity(model)
    out.label = pretty(node)
    return out


def parse_operator(src, model):
    """Parse and compile ``src``; returns the oracle (AST on ``.ast``)."""
    node = parse(src, model)
    op = compile_expr(node, model)
    op.ast = node
    return op
