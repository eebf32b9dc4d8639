# caseforge/heapkit/oql.py
"""
OQL subset over a HeapGraph.

    SELECT <alias>[.field...] FROM <class-pattern> <alias> [WHERE <expr>]

class-pattern: an exact class name (subclasses included), a prefix ending in
'*' (e.g. org.apache.http.client.*), or a primitive array name such as char[].

expr: comparisons (= != < > <= >=) between field paths and literals,
contains(x, "lit"), startsWith(x, "lit"), x instanceof class.name, combined
with AND / OR / NOT and parentheses. Any comparison involving null is false.
"""

import logging
import re
from typing import Any, List, NamedTuple, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict

from caseforge.core.errors import OqlParseError, TypeMismatch, UnknownField
from caseforge.schemas.heap import NULL_ID, BasicType, HeapGraph, OqlRow

logger = logging.getLogger(__name__)

STRING_CLASS = "java.lang.String"

_KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "INSTANCEOF", "NULL", "TRUE", "FALSE"}
_FUNCTIONS = {"contains", "startswith"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[().,*\[\]])
    """,
    re.VERBOSE,
)


class Token(NamedTuple):
    kind: str
    text: str
    position: int


def tokenize(query: str) -> List[Token]:
    tokens = []
    position = 0
    while position < len(query):
        match = _TOKEN_RE.match(query, position)
        if not match:
            raise OqlParseError(f"unexpected character {query[position]!r}", position)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), position))
        position = match.end()
    tokens.append(Token("end", "", len(query)))
    return tokens


# ==================== AST ====================

class Path(NamedTuple):
    alias: str
    fields: Tuple[str, ...]


class Literal(NamedTuple):
    value: Union[None, bool, int, float, str]


class Compare(NamedTuple):
    op: str
    left: Any
    right: Any


class Call(NamedTuple):
    function: str
    operand: Any
    needle: str


class InstanceOf(NamedTuple):
    operand: Any
    class_name: str


class BoolOp(NamedTuple):
    op: str
    operands: Tuple[Any, ...]


class Not(NamedTuple):
    operand: Any


class ClassPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    is_prefix: bool = False

    def matches_name(self, class_name: str) -> bool:
        if not self.is_prefix:
            return class_name == self.name
        stem = self.name.rstrip(".")
        return class_name.startswith(self.name) or class_name == stem


class OqlQuery(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    select: Path
    pattern: ClassPattern
    alias: str
    where: Optional[Any] = None


# ==================== PARSER ====================

class _Parser:

    def __init__(self, query: str):
        self.tokens = tokenize(query)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def at_keyword(self, word: str) -> bool:
        return self.current.kind == "name" and self.current.text.upper() == word

    def expect_keyword(self, word: str) -> None:
        if not self.at_keyword(word):
            raise OqlParseError(f"expected {word}, found {self.current.text or 'end of query'!r}", self.current.position)
        self.advance()

    def expect_punct(self, char: str) -> None:
        if self.current.text != char or self.current.kind != "punct":
            raise OqlParseError(f"expected {char!r}, found {self.current.text or 'end of query'!r}", self.current.position)
        self.advance()

    def identifier(self) -> str:
        token = self.current
        if token.kind != "name" or token.text.upper() in _KEYWORDS:
            raise OqlParseError(f"expected an identifier, found {token.text or 'end of query'!r}", token.position)
        self.advance()
        return token.text

    def parse(self) -> OqlQuery:
        self.expect_keyword("SELECT")
        select = self.path()
        self.expect_keyword("FROM")
        pattern = self.class_pattern()
        alias = self.identifier()
        if select.alias != alias:
            raise OqlParseError(f"SELECT refers to '{select.alias}' but the FROM alias is '{alias}'", 0)
        where = None
        if self.at_keyword("WHERE"):
            self.advance()
            where = self.expression()
        if self.current.kind != "end":
            raise OqlParseError(f"unexpected {self.current.text!r}", self.current.position)
        self._check_aliases(where, alias)
        return OqlQuery(select=select, pattern=pattern, alias=alias, where=where)

    def _check_aliases(self, node: Any, alias: str) -> None:
        if isinstance(node, Path):
            if node.alias != alias:
                raise OqlParseError(f"unknown alias '{node.alias}'", 0)
        elif isinstance(node, Compare):
            self._check_aliases(node.left, alias)
            self._check_aliases(node.right, alias)
        elif isinstance(node, (Call, InstanceOf, Not)):
            self._check_aliases(node.operand, alias)
        elif isinstance(node, BoolOp):
            for operand in node.operands:
                self._check_aliases(operand, alias)

    def path(self) -> Path:
        alias = self.identifier()
        fields = []
        while self.current.text == "." and self.current.kind == "punct":
            self.advance()
            fields.append(self.identifier())
        return Path(alias, tuple(fields))

    def class_name(self) -> Tuple[str, bool]:
        """Dotted class name; returns (name, is_prefix)."""
        start = self.current.position
        parts = []
        if self.current.kind != "name":
            raise OqlParseError("expected a class name", start)
        parts.append(self.advance().text)
        is_prefix = False
        while self.current.kind == "punct" and self.current.text in (".", "*", "["):
            text = self.current.text
            if text == "*":
                self.advance()
                is_prefix = True
                break
            if text == "[":
                self.advance()
                self.expect_punct("]")
                parts[-1] += "[]"
                break
            self.advance()
            if self.current.text == "*":
                self.advance()
                parts.append("")
                is_prefix = True
                break
            if self.current.kind != "name":
                raise OqlParseError("expected a name after '.'", self.current.position)
            parts.append(self.advance().text)
        return ".".join(parts), is_prefix

    def class_pattern(self) -> ClassPattern:
        name, is_prefix = self.class_name()
        return ClassPattern(name=name, is_prefix=is_prefix)

    def expression(self) -> Any:
        operands = [self.conjunction()]
        while self.at_keyword("OR"):
            self.advance()
            operands.append(self.conjunction())
        return operands[0] if len(operands) == 1 else BoolOp("OR", tuple(operands))

    def conjunction(self) -> Any:
        operands = [self.negation()]
        while self.at_keyword("AND"):
            self.advance()
            operands.append(self.negation())
        return operands[0] if len(operands) == 1 else BoolOp("AND", tuple(operands))

    def negation(self) -> Any:
        if self.at_keyword("NOT"):
            self.advance()
            return Not(self.negation())
        return self.primary()

    def primary(self) -> Any:
        token = self.current
        if token.kind == "punct" and token.text == "(":
            self.advance()
            inner = self.expression()
            self.expect_punct(")")
            return inner
        if token.kind == "name" and token.text.lower() in _FUNCTIONS:
            self.advance()
            self.expect_punct("(")
            operand = self.operand()
            self.expect_punct(",")
            needle = self.current
            if needle.kind != "string":
                raise OqlParseError(f"{token.text}() needs a string literal", needle.position)
            self.advance()
            self.expect_punct(")")
            return Call(token.text.lower(), operand, _unescape(needle.text))

        left = self.operand()
        if self.at_keyword("INSTANCEOF"):
            self.advance()
            name, is_prefix = self.class_name()
            if is_prefix:
                raise OqlParseError("instanceof needs an exact class name", token.position)
            return InstanceOf(left, name)
        if self.current.kind != "op":
            raise OqlParseError(
                f"expected a comparison, found {self.current.text or 'end of query'!r}", self.current.position
            )
        op = self.advance().text
        right = self.operand()
        return Compare(op, left, right)

    def operand(self) -> Any:
        token = self.current
        if token.kind == "string":
            self.advance()
            return Literal(_unescape(token.text))
        if token.kind == "number":
            self.advance()
            return Literal(float(token.text) if "." in token.text else int(token.text))
        if token.kind == "name" and token.text.upper() in ("NULL", "TRUE", "FALSE"):
            self.advance()
            return Literal({"NULL": None, "TRUE": True, "FALSE": False}[token.text.upper()])
        if token.kind == "name":
            return self.path()
        raise OqlParseError(f"expected a value, found {token.text or 'end of query'!r}", token.position)


def _unescape(literal: str) -> str:
    return re.sub(r"\\(.)", r"\1", literal[1:-1])


def parse_query(query: str) -> OqlQuery:
    """Parse OQL text; OqlParseError carries the offending position."""
    return _Parser(query).parse()


# ==================== EVALUATION ====================

class ObjectRef(NamedTuple):
    id: int


def string_value(graph: HeapGraph, object_id: int) -> Optional[str]:
    """
    Text of a java.lang.String instance (via its "value" array, honouring
    offset/count), or of a char[] (UTF-16) / byte[] (Latin-1) array.
    """
    if object_id in graph.prim_arrays:
        array = graph.prim_arrays[object_id]
        if array.element_type is BasicType.CHAR:
            return array.data.decode("utf-16-be", errors="replace")
        if array.element_type is BasicType.BYTE:
            return array.data.decode("latin-1")
        return None
    instance = graph.instances.get(object_id)
    if instance is None or STRING_CLASS not in graph.superclass_names(instance.class_id):
        return None
    present, value_id, _ = instance.field("value")
    if not present or not value_id or value_id not in graph.prim_arrays:
        return None
    text = string_value(graph, value_id)
    if text is None:
        return None
    has_offset, offset, _ = instance.field("offset")
    has_count, count, _ = instance.field("count")
    start = offset if has_offset and isinstance(offset, int) else 0
    if has_count and isinstance(count, int):
        return text[start:start + count]
    return text[start:]


class _Evaluator:

    def __init__(self, graph: HeapGraph, query: OqlQuery, candidates: List[int]):
        self.graph = graph
        self.query = query
        self._check_fields(query, candidates)

    def _check_fields(self, query: OqlQuery, candidates: List[int]) -> None:
        """A first-level field must exist on at least one candidate object."""
        names = set()
        for node in _walk(query.where):
            if isinstance(node, Path) and node.fields:
                names.add(node.fields[0])
        if query.select.fields:
            names.add(query.select.fields[0])
        if not names or not candidates:
            return
        available = set()
        seen_classes = set()
        for object_id in candidates:
            instance = self.graph.instances.get(object_id)
            if instance is None:
                available.add("length")
            elif instance.class_id not in seen_classes:
                seen_classes.add(instance.class_id)
                available.update(name for name, _, _ in instance.values)
        missing = sorted(names - available)
        if missing:
            raise UnknownField(f"no {self.query.pattern.name} object has a field named '{missing[0]}'")

    def resolve(self, object_id: int, path: Path) -> Any:
        value: Any = ObjectRef(object_id)
        for name in path.fields:
            if not isinstance(value, ObjectRef) or value.id == NULL_ID:
                return None
            value = self._field(value.id, name)
        if isinstance(value, ObjectRef) and value.id == NULL_ID:
            return None
        return value

    def _field(self, object_id: int, name: str) -> Any:
        graph = self.graph
        if object_id in graph.instances:
            present, value, field_type = graph.instances[object_id].field(name)
            if not present:
                return None
            if field_type is BasicType.OBJECT:
                return ObjectRef(value) if value else None
            return value
        if name == "length":
            if object_id in graph.obj_arrays:
                return len(graph.obj_arrays[object_id].elements)
            if object_id in graph.prim_arrays:
                return graph.prim_arrays[object_id].count
        return None

    def value(self, object_id: int, node: Any) -> Any:
        if isinstance(node, Literal):
            return node.value
        return self.resolve(object_id, node)

    def text(self, value: Any) -> Optional[str]:
        if isinstance(value, str):
            return value
        if isinstance(value, ObjectRef):
            return string_value(self.graph, value.id)
        return None

    def _is_string(self, value: Any) -> bool:
        """A String instance whose value array is null or missing still counts as a string."""
        if not isinstance(value, ObjectRef):
            return False
        instance = self.graph.instances.get(value.id)
        return instance is not None and STRING_CLASS in self.graph.superclass_names(instance.class_id)

    def test(self, object_id: int, node: Any) -> bool:
        if node is None:
            return True
        if isinstance(node, BoolOp):
            results = (self.test(object_id, operand) for operand in node.operands)
            return all(results) if node.op == "AND" else any(results)
        if isinstance(node, Not):
            return not self.test(object_id, node.operand)
        if isinstance(node, Call):
            value = self.value(object_id, node.operand)
            if value is None:
                return False
            text = self.text(value)
            if text is None and self._is_string(value):
                return False
            if text is None:
                raise TypeMismatch(f"{node.function}() needs a string, got {_describe(value)}")
            return node.needle in text if node.function == "contains" else text.startswith(node.needle)
        if isinstance(node, InstanceOf):
            value = self.value(object_id, node.operand)
            if value is None:
                return False
            if not isinstance(value, ObjectRef):
                raise TypeMismatch(f"instanceof needs an object, got {_describe(value)}")
            return node.class_name in _class_names(self.graph, value.id)
        return self.compare(object_id, node)

    def compare(self, object_id: int, node: Compare) -> bool:
        left = self.value(object_id, node.left)
        right = self.value(object_id, node.right)
        if left is None or right is None:
            return False
        left, right = self._coerce(left, right)
        if node.op in ("=", "!="):
            equal = left == right
            return equal if node.op == "=" else not equal
        if isinstance(left, bool) or isinstance(right, bool) or isinstance(left, ObjectRef):
            raise TypeMismatch(f"'{node.op}' cannot order {_describe(left)} and {_describe(right)}")
        return _ORDERINGS[node.op](left, right)

    def _coerce(self, left: Any, right: Any) -> Tuple[Any, Any]:
        if isinstance(left, ObjectRef) and isinstance(right, ObjectRef):
            return left, right
        if isinstance(left, str) or isinstance(right, str):
            left_text, right_text = self.text(left), self.text(right)
            if left_text is None or right_text is None:
                raise TypeMismatch(f"cannot compare {_describe(left)} with {_describe(right)}")
            return left_text, right_text
        if isinstance(left, ObjectRef) or isinstance(right, ObjectRef):
            raise TypeMismatch(f"cannot compare {_describe(left)} with {_describe(right)}")
        if isinstance(left, bool) != isinstance(right, bool):
            raise TypeMismatch(f"cannot compare {_describe(left)} with {_describe(right)}")
        return left, right

    def project(self, object_id: int) -> Any:
        value = self.resolve(object_id, self.query.select)
        if isinstance(value, ObjectRef):
            return string_value(self.graph, value.id)
        return value


_ORDERINGS: dict = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
}


def _describe(value: Any) -> str:
    if isinstance(value, ObjectRef):
        return f"object 0x{value.id:x}"
    return type(value).__name__


def _walk(node: Any):
    if node is None:
        return
    yield node
    if isinstance(node, Compare):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, (Call, InstanceOf, Not)):
        yield from _walk(node.operand)
    elif isinstance(node, BoolOp):
        for operand in node.operands:
            yield from _walk(operand)


def _class_names(graph: HeapGraph, object_id: int) -> List[str]:
    """Names the object answers to: its class and ancestors, or its array type."""
    if object_id in graph.instances:
        return graph.superclass_names(graph.instances[object_id].class_id)
    if graph.is_object(object_id):
        return [graph.class_name_of(object_id)]
    return []


def candidates(graph: HeapGraph, pattern: ClassPattern) -> List[int]:
    """Objects selected by FROM, in id order."""
    selected = []
    for object_id in graph.object_ids():
        names = _class_names(graph, object_id)
        if pattern.is_prefix:
            hit = pattern.matches_name(names[0])
        else:
            hit = pattern.name in names
        if hit:
            selected.append(object_id)
    return selected


def oql_execute(graph: HeapGraph, query: Union[str, OqlQuery]) -> List[OqlRow]:
    """
    Run a query; rows are ordered by object id.

    Raises:
        OqlParseError, UnknownField, TypeMismatch
    """
    parsed = parse_query(query) if isinstance(query, str) else query
    selected = candidates(graph, parsed.pattern)
    evaluator = _Evaluator(graph, parsed, selected)
    rows = [
        OqlRow(id=object_id, class_name=graph.class_name_of(object_id), value=evaluator.project(object_id))
        for object_id in selected
        if evaluator.test(object_id, parsed.where)
    ]
    logger.info(f"OQL matched {len(rows)} of {len(selected)} candidate objects")
    return rows
