"""Reverse-mode differentiation over a dynamically recorded operation tape.

A :class:`Tape` is a Wengert list: every differentiable operation applied to a
:class:`Var` appends a node holding the forward value, the indices of its
parents and a vector-Jacobian product closure.  Parents always precede their
children, so a single reverse sweep accumulates all adjoints.

The tape is rebuilt for each forward pass and must not be shared between
threads; run independent batch shards on independent tapes and sum the
resulting gradients explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


@dataclass
class Node:
    op: str
    parents: tuple[int, ...]
    value: np.ndarray
    vjp: Callable[[np.ndarray], Sequence[np.ndarray]] | None = None
    name: str | None = None


class Var:
    """Handle to a node on a tape.  Supports the usual arithmetic operators."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None  # make ndarray <op> Var defer to the reflected Var operator

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Var(#{self.index} {node.op} shape={self.shape})"

    # Operators are bound in ``ops`` to avoid a circular import.


@dataclass
class Tape:
    nodes: list[Node] = field(default_factory=list)
    adjoints: list[np.ndarray | None] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value, name: str | None = None) -> Var:
        arr = np.array(value, dtype=np.float64)
        self.nodes.append(Node("leaf", (), arr, None, name))
        return Var(self, len(self.nodes) - 1)

    def watch(self, params: dict[str, np.ndarray]) -> dict[str, Var]:
        """Register every array of ``params`` as a named leaf."""
        return {k: self.leaf(v, name=k) for k, v in params.items()}

    def record(self, op: str, value: np.ndarray, parents: Iterable[int], vjp) -> Var:
        parents = tuple(parents)
        n = len(self.nodes)
        if any(p >= n for p in parents):
            raise ValueError("parent index must precede the new node")
        self.nodes.append(Node(op, parents, value, vjp))
        return Var(self, n)

    def backward(self, root: Var) -> dict[int, np.ndarray]:
        """Reverse sweep from a scalar ``root``; returns leaf gradients by node id."""
        if root.tape is not self:
            raise ValueError("root belongs to a different tape")
        if root.value.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
        adj: list[np.ndarray | None] = [None] * len(self.nodes)
        adj[root.index] = np.ones_like(root.value)
        for i in range(root.index, -1, -1):
            g = adj[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            for p, gp in zip(node.parents, node.vjp(g)):
                if gp is None:
                    continue
                adj[p] = gp if adj[p] is None else adj[p] + gp
        self.adjoints = adj
        return {
            i: (adj[i] if adj[i] is not None else np.zeros_like(node.value))
            for i, node in enumerate(self.nodes)
            if node.op == "leaf"
        }

    def gradients(self, root: Var, leaves: dict[str, Var]) -> dict[str, np.ndarray]:
        grads = self.backward(root)
        return {k: grads[v.index] for k, v in leaves.items()}

    def dump(self) -> str:
        """JSON description of the recorded graph (ops, shapes, parents)."""
        return json.dumps(
            [
                {"id": i, "op": n.op, "name": n.name, "shape": list(n.value.shape),
                 "parents": list(n.parents)}
                for i, n in enumerate(self.nodes)
            ]
        )
