"""Parser for the planning-language subset.

Hand-rolled s-expression lexer plus a validating builder. Both entry points
reject anything outside the supported subset with a positioned syntax error,
a semantic error, or an unsupported-feature error, instead of guessing.
Input is case-insensitive; everything is normalized to lower case.
"""

from __future__ import annotations

import re

from .errors import (
    PddlSemanticError,
    PddlSyntaxError,
    UnsupportedFeatureError,
)
from .model import (
    ROOT_TYPE,
    SUPPORTED_REQUIREMENTS,
    ActionSchema,
    DomainDef,
    Literal,
    Predicate,
    ProblemDef,
    TypedVar,
)

__all__ = ["parse_domain", "parse_problem", "parse_goal"]

_NAME_RE = re.compile(r"^[a-z][a-z0-9_-]*$")
_VAR_RE = re.compile(r"^\?[a-z][a-z0-9_-]*$")
_RESERVED = {"and", "not", "define", "domain", "problem"}


class _Tok:
    __slots__ = ("val", "line", "col")

    def __init__(self, val: str, line: int, col: int):
        self.val = val
        self.line = line
        self.col = col


class _List(list):
    """S-expression node; carries the opening paren's position."""

    line = 0
    col = 0


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append(_Tok(ch, line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < n and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            toks.append(_Tok(text[start:i].lower(), line, start_col))
    return toks


def _read_sexprs(text: str) -> list:
    toks = _lex(text)
    stack: list[_List] = []
    top: list = []
    for t in toks:
        if t.val == "(":
            node = _List()
            node.line, node.col = t.line, t.col
            if stack:
                stack[-1].append(node)
            else:
                top.append(node)
            stack.append(node)
        elif t.val == ")":
            if not stack:
                raise PddlSyntaxError("unmatched ')'", t.line, t.col)
            stack.pop()
        else:
            if not stack:
                raise PddlSyntaxError(
                    f"expected '(' before {t.val!r}", t.line, t.col
                )
            stack[-1].append(t)
    if stack:
        open_node = stack[-1]
        raise PddlSyntaxError(
            "unbalanced parentheses: expected ')'", open_node.line, open_node.col
        )
    return top


def _pos(node) -> tuple[int, int]:
    return (node.line, node.col)


def _head(node: _List, context: str) -> str:
    if not node or not isinstance(node[0], _Tok):
        raise PddlSyntaxError(f"expected a symbol to start {context}", *_pos(node))
    return node[0].val


def _sym(node, context: str) -> str:
    if not isinstance(node, _Tok):
        raise PddlSyntaxError(f"expected a symbol in {context}", *_pos(node))
    return node.val


def _check_name(name: str, context: str, pos) -> str:
    if not _NAME_RE.match(name) or name in _RESERVED:
        raise PddlSyntaxError(
            f"invalid {context} name {name!r}", pos.line, pos.col
        )
    return name


def _parse_typed_list(items: list, what: str, want_vars: bool) -> list[TypedVar]:
    """name* [- type] groups; untyped entries get the root type."""
    out: list[TypedVar] = []
    pending: list[_Tok] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, _Tok):
            raise PddlSyntaxError(f"expected a name in {what}", *_pos(tok))
        if tok.val == "-":
            if not pending:
                raise PddlSyntaxError(
                    f"'-' with no names before it in {what}", tok.line, tok.col
                )
            if i + 1 >= len(items) or not isinstance(items[i + 1], _Tok):
                raise PddlSyntaxError(
                    f"expected a type name after '-' in {what}", tok.line, tok.col
                )
            typ = items[i + 1].val
            _check_name(typ, "type", items[i + 1])
            for p in pending:
                out.append(TypedVar(p.val, typ))
            pending = []
            i += 2
        else:
            name = tok.val
            if want_vars:
                if not _VAR_RE.match(name):
                    raise PddlSyntaxError(
                        f"expected a ?variable, got {name!r}", tok.line, tok.col
                    )
            else:
                _check_name(name, what, tok)
            pending.append(tok)
            i += 1
    for p in pending:
        out.append(TypedVar(p.val, ROOT_TYPE))
    seen = set()
    for tv in out:
        if tv.name in seen:
            raise PddlSemanticError(f"duplicate name {tv.name!r} in {what}")
        seen.add(tv.name)
    return out


def _parse_literal(node, context: str) -> Literal:
    if not isinstance(node, _List) or not node:
        raise PddlSyntaxError(f"expected an atom in {context}", *_pos(node))
    head = _head(node, context)
    if head == "not":
        if len(node) != 2 or not isinstance(node[1], _List):
            raise PddlSyntaxError(
                "'not' takes exactly one atom", *_pos(node)
            )
        inner = _parse_literal(node[1], context)
        if inner.negated:
            raise PddlSyntaxError("double negation is not supported", *_pos(node))
        return Literal(inner.pred, inner.args, negated=True)
    _check_name(head, "predicate", node[0])
    args = tuple(_sym(a, context) for a in node[1:])
    return Literal(head, args, negated=False)


def _parse_conjunction(node, context: str) -> tuple[Literal, ...]:
    """(and lit*) or a bare literal."""
    if not isinstance(node, _List) or not node:
        raise PddlSyntaxError(f"expected {context}", *_pos(node))
    if isinstance(node[0], _Tok) and node[0].val == "and":
        return tuple(_parse_literal(kid, context) for kid in node[1:])
    return (_parse_literal(node, context),)


def _require_define(forms: list, kind: str) -> _List:
    if len(forms) != 1 or not isinstance(forms[0], _List):
        raise PddlSyntaxError(
            f"expected exactly one (define ...) form for the {kind}", 1, 1
        )
    root = forms[0]
    if _head(root, "file") != "define":
        raise PddlSyntaxError(f"expected (define ...)", *_pos(root))
    if len(root) < 2 or not isinstance(root[1], _List) or len(root[1]) != 2:
        raise PddlSyntaxError(
            f"expected ({kind} <name>) after define", *_pos(root)
        )
    if _head(root[1], "define header") != kind:
        raise PddlSyntaxError(f"expected ({kind} <name>)", *_pos(root[1]))
    return root


def _literal_checks(
    lit: Literal,
    dom: DomainDef,
    where: str,
    var_types: dict[str, str] | None,
    negative_ok_reason: str | None,
) -> None:
    """Shared validation for action-body, init and goal literals."""
    pred = dom.predicates.get(lit.pred)
    if pred is None:
        raise PddlSemanticError(f"unknown predicate {lit.pred!r} in {where}")
    if len(lit.args) != pred.arity:
        raise PddlSemanticError(
            f"predicate {lit.pred!r} takes {pred.arity} arguments, "
            f"got {len(lit.args)} in {where}"
        )
    if lit.negated and negative_ok_reason is not None:
        raise PddlSemanticError(negative_ok_reason)
    if var_types is not None:
        for arg, param in zip(lit.args, pred.params):
            if not arg.startswith("?"):
                raise PddlSemanticError(
                    f"constant {arg!r} in {where}: constants in action bodies "
                    "are not supported"
                )
            if arg not in var_types:
                raise PddlSemanticError(
                    f"variable {arg} in {where} is not a parameter"
                )
            if not dom.is_subtype(var_types[arg], param.type):
                raise PddlSemanticError(
                    f"variable {arg} has type {var_types[arg]!r} but "
                    f"{lit.pred!r} needs {param.type!r} in {where}"
                )


def parse_goal(text: str) -> tuple[Literal, ...]:
    """Parse a free-standing goal condition: an atom, (not <atom>), or
    (and <literal>*). Names are checked for shape only; matching them
    against a domain and its objects happens where the goal is used."""
    forms = _read_sexprs(text)
    if len(forms) != 1:
        raise PddlSyntaxError("expected exactly one goal expression", 1, 1)
    return _parse_conjunction(forms[0], "goal")


def parse_domain(text: str) -> DomainDef:
    """Parse domain source text into a DomainDef.

    Errors: PddlSyntaxError with line/column for malformed text,
    UnsupportedFeatureError for requirements or sections outside the
    subset, PddlSemanticError for validation failures.
    """
    root = _require_define(_read_sexprs(text), "domain")
    name = _sym(root[1][1], "domain name")
    _check_name(name, "domain", root[1][1])

    requirements: tuple[str, ...] = ()
    types: dict[str, str | None] = {ROOT_TYPE: None}
    predicates: dict[str, Predicate] = {}
    actions: dict[str, ActionSchema] = {}
    seen_sections: set[str] = set()

    for section in root[2:]:
        if not isinstance(section, _List):
            raise PddlSyntaxError("expected a (:section ...)", *_pos(section))
        head = _head(section, "domain section")
        if head in (":requirements", ":types", ":predicates"):
            if head in seen_sections:
                raise PddlSemanticError(f"duplicate {head} section")
            seen_sections.add(head)

        if head == ":requirements":
            reqs = []
            for item in section[1:]:
                r = _sym(item, ":requirements")
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(
                        f"requirement {r!r} is not supported; supported: "
                        + ", ".join(SUPPORTED_REQUIREMENTS)
                    )
                reqs.append(r)
            requirements = tuple(reqs)
        elif head == ":types":
            declared: set[str] = set()
            for tv in _parse_typed_list(section[1:], "type", want_vars=False):
                if tv.name in declared:
                    raise PddlSemanticError(f"type {tv.name!r} declared twice")
                declared.add(tv.name)
                if tv.name == ROOT_TYPE:
                    raise PddlSemanticError(
                        f"type {ROOT_TYPE!r} cannot be redeclared"
                    )
                types[tv.name] = tv.type
                # a parent mentioned but never declared sits under the root
                types.setdefault(tv.type, ROOT_TYPE if tv.type != ROOT_TYPE else None)
            for t in types:
                seen = set()
                cur = t
                while cur is not None:
                    if cur in seen:
                        raise PddlSemanticError(f"type cycle through {t!r}")
                    seen.add(cur)
                    cur = types.get(cur)
        elif head == ":predicates":
            for pnode in section[1:]:
                if not isinstance(pnode, _List) or not pnode:
                    raise PddlSyntaxError(
                        "expected (name ?params...)", *_pos(pnode)
                    )
                pname = _head(pnode, "predicate")
                _check_name(pname, "predicate", pnode[0])
                if pname in predicates:
                    raise PddlSemanticError(f"predicate {pname!r} declared twice")
                params = tuple(
                    _parse_typed_list(pnode[1:], f"predicate {pname}", True)
                )
                for tv in params:
                    if tv.type not in types:
                        raise PddlSemanticError(
                            f"unknown type {tv.type!r} in predicate {pname!r}"
                        )
                predicates[pname] = Predicate(pname, params)
        elif head == ":action":
            if len(section) < 2 or not isinstance(section[1], _Tok):
                raise PddlSyntaxError("expected an action name", *_pos(section))
            aname = section[1].val
            _check_name(aname, "action", section[1])
            if aname in actions:
                raise PddlSemanticError(f"action {aname!r} declared twice")
            body: dict[str, object] = {}
            i = 2
            while i < len(section):
                key = _sym(section[i], "action body")
                if key not in (":parameters", ":precondition", ":effect"):
                    raise UnsupportedFeatureError(
                        f"action keyword {key!r} is not supported"
                    )
                if key in body:
                    raise PddlSemanticError(f"duplicate {key} in action {aname!r}")
                if i + 1 >= len(section):
                    raise PddlSyntaxError(
                        f"missing value after {key}", section[i].line, section[i].col
                    )
                body[key] = section[i + 1]
                i += 2
            for key in (":parameters", ":precondition", ":effect"):
                if key not in body:
                    raise PddlSemanticError(
                        f"action {aname!r} is missing {key}"
                    )
            pnode = body[":parameters"]
            if not isinstance(pnode, _List):
                raise PddlSyntaxError(
                    "expected a parameter list", *_pos(pnode)
                )
            params = tuple(
                _parse_typed_list(list(pnode), f"action {aname} parameters", True)
            )
            for tv in params:
                if tv.type not in types:
                    raise PddlSemanticError(
                        f"unknown type {tv.type!r} in action {aname!r}"
                    )
            pre = _parse_conjunction(
                body[":precondition"], f"precondition of {aname}"
            )
            eff = _parse_conjunction(body[":effect"], f"effect of {aname}")
            if not eff:
                raise PddlSemanticError(f"action {aname!r} has an empty effect")
            add = tuple(l for l in eff if not l.negated)
            delete = tuple(
                Literal(l.pred, l.args, negated=False) for l in eff if l.negated
            )
            actions[aname] = ActionSchema(aname, params, pre, add, delete)
        else:
            raise UnsupportedFeatureError(
                f"domain section {head!r} is not supported"
            )

    dom = DomainDef(
        name=name,
        requirements=requirements,
        types=types,
        predicates=predicates,
        actions=actions,
    )

    uses_typing = any(
        tv.type != ROOT_TYPE
        for p in predicates.values()
        for tv in p.params
    ) or any(
        tv.type != ROOT_TYPE for a in actions.values() for tv in a.params
    ) or len([t for t in types if t != ROOT_TYPE]) > 0
    if uses_typing and ":typing" not in requirements:
        raise PddlSemanticError(
            "types are used but :typing is not in :requirements"
        )
    neg_ok = ":negative-preconditions" in requirements
    for act in actions.values():
        var_types = {tv.name: tv.type for tv in act.params}
        for lit in act.precondition:
            _literal_checks(
                lit,
                dom,
                f"action {act.name!r}",
                var_types,
                None
                if neg_ok
                else "negated precondition needs :negative-preconditions "
                f"in action {act.name!r}",
            )
        for lit in act.add + act.delete:
            _literal_checks(lit, dom, f"action {act.name!r}", var_types, None)
    return dom


def parse_problem(text: str, domain: DomainDef) -> ProblemDef:
    """Parse problem source text and validate it against its domain."""
    root = _require_define(_read_sexprs(text), "problem")
    name = _sym(root[1][1], "problem name")
    _check_name(name, "problem", root[1][1])

    domain_name: str | None = None
    objects: dict[str, str] = {}
    init: set = set()
    goal: tuple[Literal, ...] | None = None
    seen_sections: set[str] = set()

    for section in root[2:]:
        if not isinstance(section, _List):
            raise PddlSyntaxError("expected a (:section ...)", *_pos(section))
        head = _head(section, "problem section")
        if head in seen_sections:
            raise PddlSemanticError(f"duplicate {head} section")
        seen_sections.add(head)

        if head == ":domain":
            if len(section) != 2:
                raise PddlSyntaxError("expected (:domain <name>)", *_pos(section))
            domain_name = _sym(section[1], ":domain")
            if domain_name != domain.name:
                raise PddlSemanticError(
                    f"problem references domain {domain_name!r} but was "
                    f"parsed against {domain.name!r}"
                )
        elif head == ":objects":
            for tv in _parse_typed_list(section[1:], "object", want_vars=False):
                if tv.name in objects:
                    raise PddlSemanticError(f"object {tv.name!r} declared twice")
                if tv.type not in domain.types:
                    raise PddlSemanticError(
                        f"unknown type {tv.type!r} for object {tv.name!r}"
                    )
                objects[tv.name] = tv.type
        elif head == ":init":
            for node in section[1:]:
                lit = _parse_literal(node, ":init")
                if lit.negated:
                    raise PddlSemanticError(
                        "negated atoms are not allowed in :init"
                    )
                _check_ground_literal(lit, domain, objects, ":init")
                init.add(lit.atom())
        elif head == ":goal":
            if len(section) != 2:
                raise PddlSyntaxError("expected (:goal <condition>)", *_pos(section))
            goal = _parse_conjunction(section[1], "goal")
            neg_ok = ":negative-preconditions" in domain.requirements
            for lit in goal:
                if lit.negated and not neg_ok:
                    raise PddlSemanticError(
                        "negated goal needs :negative-preconditions in the domain"
                    )
                _check_ground_literal(lit, domain, objects, ":goal")
        else:
            raise UnsupportedFeatureError(
                f"problem section {head!r} is not supported"
            )

    if domain_name is None:
        raise PddlSemanticError("problem has no (:domain ...) section")
    if goal is None:
        raise PddlSemanticError("problem has no (:goal ...) section")
    return ProblemDef(
        name=name,
        domain=domain_name,
        objects=objects,
        init=frozenset(init),
        goal=goal,
    )


def _check_ground_literal(
    lit: Literal, dom: DomainDef, objects: dict[str, str], where: str
) -> None:
    pred = dom.predicates.get(lit.pred)
    if pred is None:
        raise PddlSemanticError(f"unknown predicate {lit.pred!r} in {where}")
    if len(lit.args) != pred.arity:
        raise PddlSemanticError(
            f"predicate {lit.pred!r} takes {pred.arity} arguments, "
            f"got {len(lit.args)} in {where}"
        )
    for arg, param in zip(lit.args, pred.params):
        if arg.startswith("?"):
            raise PddlSemanticError(f"variable {arg} not allowed in {where}")
        if arg not in objects:
            raise PddlSemanticError(f"unknown object {arg!r} in {where}")
        if not dom.is_subtype(objects[arg], param.type):
            raise PddlSemanticError(
                f"object {arg!r} has type {objects[arg]!r} but {lit.pred!r} "
                f"needs {param.type!r} in {where}"
            )
