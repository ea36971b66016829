"""Operator alphabet and grammar configuration for program architectures.

A grammar is the fixed production shape

    alpha ::= unary alpha | binary alpha alpha | terminal | c

parameterised by which unary/binary operators and which input variables are
allowed, plus whether the constant terminal ``c`` is present.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping


class GrammarError(ValueError):
    """Invalid grammar configuration."""


class OperatorKind(Enum):
    SIN = "sin"
    EXP = "exp"
    LOG = "log"
    POW2 = "pow2"
    POW3 = "pow3"
    ADD = "add"
    MULTIPLY = "multiply"

    @property
    def arity(self) -> int:
        return 2 if self in (OperatorKind.ADD, OperatorKind.MULTIPLY) else 1


UNARY_OPERATORS = tuple(op for op in OperatorKind if op.arity == 1)
BINARY_OPERATORS = tuple(op for op in OperatorKind if op.arity == 2)

_ALIASES = {
    "sin": OperatorKind.SIN,
    "exp": OperatorKind.EXP,
    "log": OperatorKind.LOG,
    "pow2": OperatorKind.POW2,
    "pow3": OperatorKind.POW3,
    "+": OperatorKind.ADD,
    "add": OperatorKind.ADD,
    "*": OperatorKind.MULTIPLY,
    "multiply": OperatorKind.MULTIPLY,
    "mul": OperatorKind.MULTIPLY,
}


def operator_from_name(name: str) -> OperatorKind:
    """Map a case-insensitive operator token to its OperatorKind."""
    try:
        return _ALIASES[str(name).strip().lower()]
    except KeyError:
        raise GrammarError(f"unknown operator {name!r}") from None


@dataclass(frozen=True)
class GrammarSpec:
    unary: tuple[OperatorKind, ...]
    binary: tuple[OperatorKind, ...]
    terminals: tuple[str, ...]
    include_constant: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "unary", tuple(self.unary))
        object.__setattr__(self, "binary", tuple(self.binary))
        object.__setattr__(self, "terminals", tuple(self.terminals))
        for op in self.unary:
            if op.arity != 1:
                raise GrammarError(f"{op.value!r} is not a unary operator")
        for op in self.binary:
            if op.arity != 2:
                raise GrammarError(f"{op.value!r} is not a binary operator")
        _check_unique(self.unary, "operator", lambda op: op.value)
        _check_unique(self.binary, "operator", lambda op: op.value)
        if not self.terminals:
            raise GrammarError("terminal list is empty")
        for name in self.terminals:
            if not isinstance(name, str) or not name.isidentifier():
                raise GrammarError(f"invalid terminal name {name!r}")
        _check_unique(self.terminals, "terminal", str)

    @property
    def n_unary(self) -> int:
        return len(self.unary)

    @property
    def n_binary(self) -> int:
        return len(self.binary)

    @property
    def n_terminals(self) -> int:
        return len(self.terminals)

    @property
    def n_leaf_summands(self) -> int:
        return len(self.terminals) + int(self.include_constant)

    @property
    def n_children(self) -> int:
        """Child nodes owned by an internal node (one per unary, two per binary)."""
        return len(self.unary) + 2 * len(self.binary)

    def to_dict(self) -> dict[str, Any]:
        return {
            "unary": [op.value for op in self.unary],
            "binary": [op.value for op in self.binary],
            "terminals": list(self.terminals),
            "constant": self.include_constant,
        }


def _check_unique(items, what, key) -> None:
    seen = set()
    for item in items:
        k = key(item)
        if k in seen:
            raise GrammarError(f"duplicate {what} {k!r}")
        seen.add(k)


def summands_per_node(spec: GrammarSpec) -> int:
    """Number of weighted summands at every internal node."""
    return spec.n_unary + spec.n_binary + spec.n_terminals + int(spec.include_constant)


def parse_grammar(config: Mapping[str, Any] | str) -> GrammarSpec:
    """Build a validated GrammarSpec from a config mapping or JSON text.

    Recognised keys: ``unary``, ``binary``, ``terminals`` and ``constant``.
    A ``depth`` key may be present (it belongs to the run config) and is
    ignored here.
    """
    if isinstance(config, str):
        config = json.loads(config)
    if not isinstance(config, Mapping):
        raise GrammarError("grammar config must be a mapping")
    missing = [k for k in ("unary", "binary", "terminals") if k not in config]
    if missing:
        raise GrammarError(f"grammar config missing keys: {', '.join(missing)}")

    unary = [operator_from_name(tok) for tok in config["unary"]]
    binary = [operator_from_name(tok) for tok in config["binary"]]
    for tok, op in zip(config["unary"], unary):
        if op.arity != 1:
            raise GrammarError(f"{tok!r} listed as unary but has arity {op.arity}")
    for tok, op in zip(config["binary"], binary):
        if op.arity != 2:
            raise GrammarError(f"{tok!r} listed as binary but has arity {op.arity}")
    return GrammarSpec(
        unary=tuple(unary),
        binary=tuple(binary),
        terminals=tuple(str(t) for t in config["terminals"]),
        include_constant=bool(config.get("constant", True)),
    )
