"""
Parsing and pretty-printing of programs (.imp) and specifications (.spec).

Surface syntax uses ASCII for the mathematical symbols: ``need x`` for the
need variable of x, ``x'`` for final values, ``inf`` for infinity,
``/\\``, ``\\/``, ``~`` and ``==>`` for the connectives, and

    forall j: lo..hi . body
    exists j: lo..hi . body
    max j: lo..hi | guard . term

for bounded quantifiers.  ``#`` starts a comment that runs to end of line.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

from .astcore import (
    ArrayCell,
    ArrayRef,
    Assign,
    Binary,
    BoolLit,
    If,
    IntLit,
    Ok,
    Print,
    Scalar,
    Seq,
    SourceSpan,
    Stmt,
    Stop,
    Unary,
    Var,
    While,
    flatten_seq,
    seq,
)
from .errors import ParseError, UnboundQuantifierVariable
from .predicate import (
    INF,
    And,
    Arith,
    Cmp,
    Cond,
    Const,
    Exists,
    Fact,
    Forall,
    Implies,
    Max,
    Neg,
    Not,
    Or,
    Pred,
    Ref,
    render_block,
)

logger = logging.getLogger(__name__)

KEYWORDS = {
    "need", "inf", "forall", "exists", "max", "if", "then", "else", "fi",
    "while", "spec", "do", "od", "print", "ok", "stop", "true", "false",
}

# Longest symbols first
SYMBOLS = (
    "==>", ":=", "..", "/\\", "\\/", "!=", "<=", ">=",
    "'", "!", "~", "(", ")", ";", ":", ".", "|", "=", "<", ">", "+", "-", "*", "/",
)

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")

TIME_NAME = "t"


@dataclass(frozen=True)
class Token:
    kind: str  # INT, IDENT, EOF, or the keyword/symbol text itself
    text: str
    span: SourceSpan


def tokenize(text: str) -> List[Token]:
    """Split source text into tokens; raises ParseError on an unknown character."""
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    length = len(text)
    while pos < length:
        ch = text[pos]
        if ch == "\n":
            pos += 1
            line += 1
            line_start = pos
            continue
        if ch.isspace():
            pos += 1
            continue
        if ch == "#":
            while pos < length and text[pos] != "\n":
                pos += 1
            continue
        column = pos - line_start + 1
        if ch.isdigit():
            end = pos
            while end < length and text[end].isdigit():
                end += 1
            tokens.append(Token("INT", text[pos:end], SourceSpan(line, column, pos, end)))
            pos = end
            continue
        if ch.isalpha() or ch == "_":
            end = pos
            while end < length and (text[end].isalnum() or text[end] == "_"):
                end += 1
            word = text[pos:end]
            kind = word if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, SourceSpan(line, column, pos, end)))
            pos = end
            continue
        for symbol in SYMBOLS:
            if text.startswith(symbol, pos):
                end = pos + len(symbol)
                tokens.append(Token(symbol, symbol, SourceSpan(line, column, pos, end)))
                pos = end
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", SourceSpan(line, column, pos, pos + 1))
    tokens.append(Token("EOF", "", _eof_span(text)))
    return tokens


def _eof_span(text: str) -> SourceSpan:
    """Span of the last character of the text, or of offset 0 for empty text."""
    if not text:
        return SourceSpan(1, 1, 0, 0)
    last = len(text) - 1
    line = text.count("\n", 0, last) + 1
    line_start = text.rfind("\n", 0, last) + 1
    return SourceSpan(line, last - line_start + 1, last, last + 1)


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0
        self.bound: List[str] = []
        self.binders: Set[str] = set()
        self.free_refs: List[Tuple[str, SourceSpan]] = []
        self._stop_span: Optional[SourceSpan] = None

    # -- token helpers -----------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def at(self, *kinds: str) -> bool:
        return self.current.kind in kinds

    def advance(self) -> Token:
        token = self.current
        if token.kind != "EOF":
            self.pos += 1
        return token

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        if self.current.kind != kind:
            found = self.current.text or "end of input"
            raise ParseError(f"expected {what or kind}, found {found!r}", self.current.span)
        return self.advance()

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.current.span)

    # -- programs ----------------------------------------------------------

    def program(self) -> Stmt:
        stmts = self.stmt_list(top_level=True)
        self.expect("EOF", "';' or end of program")
        if not isinstance(stmts[-1], Stop):
            logger.warning("program does not end with stop; appending it")
            stmts.append(Stop())
        return seq(*stmts)

    def stmt_list(self, top_level: bool = False) -> List[Stmt]:
        stmts = [self.statement(top_level)]
        while self.at(";"):
            self.advance()
            stmts.append(self.statement(top_level))
        for stmt in stmts[:-1]:
            if isinstance(stmt, Stop):
                raise ParseError("stop may only end a whole program", self._stop_span)
        return stmts

    def statement(self, top_level: bool) -> Stmt:
        token = self.current
        if token.kind == "ok":
            self.advance()
            return Ok()
        if token.kind == "stop":
            if not top_level:
                raise self.error("stop may only end a whole program")
            self._stop_span = token.span
            self.advance()
            return Stop()
        if token.kind == "print":
            self.advance()
            return Print(self.expr())
        if token.kind == "if":
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = seq(*self.stmt_list())
            orelse: Stmt = Ok()
            if self.at("else"):
                self.advance()
                orelse = seq(*self.stmt_list())
            self.expect("fi")
            return If(cond, then, orelse)
        if token.kind == "while":
            self.advance()
            cond = self.expr()
            spec_name = None
            if self.at("spec"):
                self.advance()
                spec_name = self.expect("IDENT", "specification name").text
            self.expect("do")
            body = seq(*self.stmt_list())
            self.expect("od")
            return While(cond, body, spec_name, span=token.span)
        if token.kind == "IDENT":
            name = self._program_name(token)
            self.advance()
            target = Scalar(name)
            if self.at("("):
                self.advance()
                target = ArrayCell(name, self.expr())
                self.expect(")")
            self.expect(":=")
            return Assign(target, self.expr())
        raise self.error(f"expected a statement, found {token.text or 'end of input'!r}")

    def _program_name(self, token: Token) -> str:
        if token.text == TIME_NAME:
            raise ParseError("t is reserved for time and cannot be a program variable", token.span)
        return token.text

    # -- program expressions -------------------------------------------------

    def expr(self):
        left = self.expr_and()
        while self.at("\\/"):
            self.advance()
            left = Binary("or", left, self.expr_and())
        return left

    def expr_and(self):
        left = self.expr_not()
        while self.at("/\\"):
            self.advance()
            left = Binary("and", left, self.expr_not())
        return left

    def expr_not(self):
        if self.at("~"):
            self.advance()
            return Unary("not", self.expr_not())
        return self.expr_cmp()

    def expr_cmp(self):
        left = self.expr_add()
        if self.at(*COMPARISONS):
            op = self.advance().kind
            left = Binary(op, left, self.expr_add())
            if self.at(*COMPARISONS):
                raise self.error("comparisons do not chain; add parentheses")
        return left

    def expr_add(self):
        left = self.expr_mul()
        while self.at("+", "-"):
            op = self.advance().kind
            left = Binary(op, left, self.expr_mul())
        return left

    def expr_mul(self):
        left = self.expr_unary()
        while self.at("*", "/"):
            op = self.advance().kind
            left = Binary(op, left, self.expr_unary())
        return left

    def expr_unary(self):
        if self.at("-"):
            self.advance()
            if self.at("INT"):
                return self.expr_postfix(IntLit(-int(self.advance().text)))
            return Unary("neg", self.expr_unary())
        return self.expr_postfix(self.expr_primary())

    def expr_postfix(self, node):
        while self.at("!"):
            self.advance()
            node = Unary("fac", node)
        return node

    def expr_primary(self):
        token = self.current
        if token.kind == "INT":
            self.advance()
            return IntLit(int(token.text))
        if token.kind in ("true", "false"):
            self.advance()
            return BoolLit(token.kind == "true")
        if token.kind == "IDENT":
            name = self._program_name(token)
            self.advance()
            if self.at("("):
                self.advance()
                index = self.expr()
                self.expect(")")
                return ArrayRef(name, index)
            return Var(name)
        if token.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error(f"expected an expression, found {token.text or 'end of input'!r}")

    # -- predicates ----------------------------------------------------------

    def pred(self) -> Pred:
        left = self.pred_or()
        if self.at("==>"):
            self.advance()
            return Implies(left, self.pred())
        return left

    def pred_or(self) -> Pred:
        parts = [self.pred_and()]
        while self.at("\\/"):
            self.advance()
            parts.append(self.pred_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def pred_and(self) -> Pred:
        parts = [self.pred_not()]
        while self.at("/\\"):
            self.advance()
            parts.append(self.pred_not())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def pred_not(self) -> Pred:
        if self.at("~"):
            self.advance()
            return Not(self.pred_not())
        return self.pred_cmp()

    def pred_cmp(self) -> Pred:
        left = self.pred_add()
        if self.at(*COMPARISONS):
            op = self.advance().kind
            left = Cmp(op, left, self.pred_add())
            if self.at(*COMPARISONS):
                raise self.error("comparisons do not chain; add parentheses")
        return left

    def pred_add(self) -> Pred:
        left = self.pred_mul()
        while self.at("+", "-"):
            op = self.advance().kind
            left = Arith(op, left, self.pred_mul())
        return left

    def pred_mul(self) -> Pred:
        left = self.pred_unary()
        while self.at("*", "/"):
            op = self.advance().kind
            left = Arith(op, left, self.pred_unary())
        return left

    def pred_unary(self) -> Pred:
        if self.at("-"):
            self.advance()
            if self.at("INT"):
                return self.pred_postfix(Const(-int(self.advance().text)))
            return Neg(self.pred_unary())
        return self.pred_postfix(self.pred_primary())

    def pred_postfix(self, node: Pred) -> Pred:
        while self.at("!"):
            self.advance()
            node = Fact(node)
        return node

    def pred_primary(self) -> Pred:
        token = self.current
        kind = token.kind
        if kind == "INT":
            self.advance()
            return Const(int(token.text))
        if kind in ("true", "false"):
            self.advance()
            return Const(kind == "true")
        if kind == "inf":
            self.advance()
            return Const(INF)
        if kind == "(":
            self.advance()
            inner = self.pred()
            self.expect(")")
            return inner
        if kind == "if":
            self.advance()
            cond = self.pred()
            self.expect("then")
            then = self.pred()
            self.expect("else", "'else' (required in specifications)")
            orelse = self.pred()
            self.expect("fi")
            return Cond(cond, then, orelse)
        if kind in ("forall", "exists"):
            self.advance()
            var, lo, hi = self.binder()
            self.expect(".")
            body = self.scoped(var, self.pred)
            return (Forall if kind == "forall" else Exists)(var, lo, hi, body)
        if kind == "max":
            self.advance()
            var, lo, hi = self.binder()
            self.expect("|")
            guard = self.scoped(var, self.pred)
            self.expect(".")
            body = self.scoped(var, self.pred)
            return Max(var, lo, hi, guard, body)
        if kind in ("need", "IDENT"):
            return self.reference()
        raise self.error(f"expected a term, found {token.text or 'end of input'!r}")

    def binder(self):
        var = self.expect("IDENT", "quantified variable").text
        self.binders.add(var)
        self.expect(":")
        lo = self.pred_add()
        self.expect("..")
        if self.at("inf"):
            self.advance()
            hi = None
        else:
            hi = self.pred_add()
        return var, lo, hi

    def scoped(self, var: str, parse):
        self.bound.append(var)
        try:
            return parse()
        finally:
            self.bound.pop()

    def check_scopes(self):
        """A name bound by a quantifier may not also be used outside that quantifier."""
        for name, span in self.free_refs:
            if name in self.binders:
                raise UnboundQuantifierVariable(
                    f"quantified variable {name} is used outside its quantifier", span
                )

    def reference(self) -> Pred:
        start = self.current
        need = False
        if self.at("need"):
            need = True
            self.advance()
        name_token = self.expect("IDENT", "variable name")
        name = name_token.text
        primed = False
        if self.at("'"):
            self.advance()
            primed = True
        index = None
        if self.at("("):
            self.advance()
            index = self.pred()
            self.expect(")")
        if name in self.bound and (need or primed or index is not None):
            raise UnboundQuantifierVariable(
                f"quantified variable {name} cannot be primed, needed or indexed", start.span
            )
        if name not in self.bound:
            self.free_refs.append((name, start.span))
        return Ref(name, primed=primed, need=need, index=index)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def parse_program(text: str) -> Stmt:
    """
    Parse a whole program.

    A program ends with stop; if it does not, stop is appended with a warning.

    Raises:
        ParseError: with the span of the offending token
    """
    return _Parser(tokenize(text)).program()


def parse_predicate(text: str) -> Pred:
    """Parse a single predicate, e.g. a command-line claim."""
    parser = _Parser(tokenize(text))
    result = parser.pred()
    parser.expect("EOF", "end of predicate")
    parser.check_scopes()
    return result


def parse_spec(text: str) -> Dict[str, Pred]:
    """
    Parse a specification file into named predicates.

    Each definition ``name = predicate`` starts at column 1; continuation
    lines must be indented.
    """
    tokens = tokenize(text)
    groups: List[List[Token]] = []
    for token in tokens[:-1]:
        if token.span.column == 1 or not groups:
            groups.append([])
        groups[-1].append(token)
    specs: Dict[str, Pred] = {}
    for group in groups:
        head = group[0]
        if head.kind != "IDENT":
            raise ParseError("a definition must start with a name at column 1", head.span)
        if head.text in specs:
            raise ParseError(f"duplicate specification {head.text}", head.span)
        last = group[-1].span
        end = Token("EOF", "", SourceSpan(last.line, last.column, last.start, last.end))
        parser = _Parser(group + [end])
        parser.advance()
        parser.expect("=", "'=' after specification name")
        body = parser.pred()
        parser.expect("EOF", "end of definition")
        parser.check_scopes()
        specs[head.text] = body
    return specs


# ---------------------------------------------------------------------------
# Pretty-printing
# ---------------------------------------------------------------------------

_EXPR_LEVEL = {"or": 2, "and": 3, "not": 4, "cmp": 5, "add": 6, "mul": 7, "neg": 8, "fac": 9}
_EXPR_SYMBOL = {"and": "/\\", "or": "\\/"}


def _expr_level(e) -> int:
    if isinstance(e, Binary):
        if e.op in ("or", "and"):
            return _EXPR_LEVEL[e.op]
        if e.op in COMPARISONS:
            return _EXPR_LEVEL["cmp"]
        return _EXPR_LEVEL["add"] if e.op in "+-" else _EXPR_LEVEL["mul"]
    if isinstance(e, Unary):
        return _EXPR_LEVEL[e.op]
    if isinstance(e, IntLit) and e.value < 0:
        return _EXPR_LEVEL["neg"]
    return 10


def _expr_wrap(e, min_level: int) -> str:
    text = format_expr(e)
    return text if _expr_level(e) >= min_level else f"({text})"


def format_expr(e) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ArrayRef):
        return f"{e.name}({format_expr(e.index)})"
    if isinstance(e, Unary):
        if e.op == "neg":
            if isinstance(e.operand, (Var, ArrayRef)):
                return f"-{format_expr(e.operand)}"
            return f"-({format_expr(e.operand)})"
        if e.op == "not":
            return f"~{_expr_wrap(e.operand, _EXPR_LEVEL['not'])}"
        if isinstance(e.operand, Unary) and e.operand.op == "fac":
            return f"{format_expr(e.operand)}!"
        return f"{_expr_wrap(e.operand, 10)}!"
    if isinstance(e, Binary):
        level = _expr_level(e)
        symbol = _EXPR_SYMBOL.get(e.op, e.op)
        if e.op in COMPARISONS:
            return f"{_expr_wrap(e.left, level + 1)} {symbol} {_expr_wrap(e.right, level + 1)}"
        return f"{_expr_wrap(e.left, level)} {symbol} {_expr_wrap(e.right, level + 1)}"
    raise TypeError(f"not an expression: {e!r}")


def _format_lvalue(target) -> str:
    if isinstance(target, ArrayCell):
        return f"{target.name}({format_expr(target.index)})"
    return target.name


def format_stmt(stmt: Stmt, indent: int = 0) -> str:
    pad = "    " * indent
    parts = flatten_seq(stmt)
    if len(parts) > 1:
        return ";\n".join(format_stmt(part, indent) for part in parts)
    if isinstance(stmt, Ok):
        return pad + "ok"
    if isinstance(stmt, Stop):
        return pad + "stop"
    if isinstance(stmt, Print):
        return f"{pad}print {format_expr(stmt.arg)}"
    if isinstance(stmt, Assign):
        return f"{pad}{_format_lvalue(stmt.target)} := {format_expr(stmt.rhs)}"
    if isinstance(stmt, If):
        return (f"{pad}if {format_expr(stmt.cond)} then\n"
                f"{format_stmt(stmt.then, indent + 1)}\n"
                f"{pad}else\n"
                f"{format_stmt(stmt.orelse, indent + 1)}\n"
                f"{pad}fi")
    if isinstance(stmt, While):
        spec = f" spec {stmt.spec_name}" if stmt.spec_name else ""
        return (f"{pad}while {format_expr(stmt.cond)}{spec} do\n"
                f"{format_stmt(stmt.body, indent + 1)}\n"
                f"{pad}od")
    raise TypeError(f"not a statement: {stmt!r}")


def format_spec(specs: Dict[str, Pred]) -> str:
    return "\n".join(f"{name} = {render_block(pred)}" for name, pred in specs.items()) + "\n"


_STMT_TYPES = (Ok, Assign, If, While, Seq, Print, Stop)


def pretty_print(x) -> str:
    """Source text for a statement, a predicate, or a name-to-predicate map."""
    if isinstance(x, dict):
        return format_spec(x)
    if isinstance(x, _STMT_TYPES):
        return format_stmt(x)
    return render_block(x)
