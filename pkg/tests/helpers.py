"""Seeded random process models for round-trip and distance tests."""

from __future__ import annotations

import itertools
import random

from mao.graph import flatten
from mao.model import Activity, Branch, Gateway, GatewayKind, ProcessModel

ROLES = ("clerk", "courier", "customer", "system", "manager", "warehouse")

VERBS = (
    "receive",
    "check",
    "pack",
    "send",
    "confirm",
    "assign",
    "update",
    "cancel",
    "weigh",
    "label",
)

THINGS = (
    "the order",
    "a package",
    "the invoice",
    "the address",
    "the shipment",
    "a pickup slot",
)

CONDITIONS = (
    "courier pickup",
    "self delivery",
    "in stock",
    "out of stock",
    "priority",
    "standard",
)

# strings that stress escaping and whitespace handling
HOSTILE = (
    'say "hi" & wave',
    "a < b > c",
    "it's fine &amp; done",
    "tabs\tand  double  spaces",
    "café 日本語",
    "trailing space ",
    "<not-a-tag/>",
)


def _phrase(rng: random.Random, hostile: bool) -> str:
    if hostile and rng.random() < 0.3:
        return rng.choice(HOSTILE)
    return f"{rng.choice(VERBS)} {rng.choice(THINGS)}"


def random_model(
    rng: random.Random,
    max_depth: int = 2,
    hostile: bool = False,
    p_gateway: float = 0.35,
    p_object: float = 0.5,
) -> ProcessModel:
    """A structurally clean model: unique ids, 2+ branches, conditions set."""
    counter = itertools.count(1)

    def make_activity() -> Activity:
        obj = _phrase(rng, hostile) if rng.random() < p_object else None
        return Activity(
            id=f"a{next(counter)}",
            role=rng.choice(ROLES),
            action=_phrase(rng, hostile),
            object=obj,
        )

    def make_nodes(depth: int) -> tuple:
        nodes = []
        for _ in range(rng.randint(1, 3)):
            if depth < max_depth and rng.random() < p_gateway:
                kind = rng.choice(list(GatewayKind))
                branches = []
                for _ in range(rng.randint(2, 3)):
                    if kind is GatewayKind.PARALLEL:
                        cond = None
                    else:
                        cond = rng.choice(CONDITIONS)
                        if hostile and rng.random() < 0.2:
                            cond = rng.choice(HOSTILE)
                    children = make_nodes(depth + 1) if rng.random() < 0.8 else ()
                    branches.append(Branch(condition=cond, children=tuple(children)))
                nodes.append(
                    Gateway(
                        id=f"g{next(counter)}",
                        kind=kind,
                        branches=tuple(branches),
                    )
                )
            else:
                nodes.append(make_activity())
        return tuple(nodes)

    name = _phrase(rng, hostile)
    return ProcessModel(name=name, nodes=make_nodes(0))


def random_small_model(rng: random.Random, max_flat: int = 8) -> ProcessModel:
    """A random model whose flattened graph has at most max_flat nodes."""
    while True:
        model = random_model(rng, max_depth=1, p_gateway=0.3)
        if len(flatten(model).nodes) <= max_flat:
            return model
