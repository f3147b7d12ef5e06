from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterable, Sequence
from typing import Any, Protocol, TypeVar

import numpy as np


class SupportsLessThan(Protocol):
    def __lt__(self, other: Any) -> bool:
        ...


Key = TypeVar("Key", bound=SupportsLessThan)
Value = TypeVar("Value")


def group_by(in_seq: Sequence[Value], key_fn: Callable[[Value], Key]) -> dict[Key, list[Value]]:
    """
    Group elements of a list.

    Args:
        in_seq: The input sequence.
        key_fn: The key function.

    Returns:
        A dict keyed by key_fn with lists of results, in key order.

    """
    return {
        key: list(group) for key, group in itertools.groupby(sorted(in_seq, key=key_fn), key=key_fn)
    }


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def derive_streams(
    seed: int | Sequence[int], names: Iterable[str]
) -> dict[str, np.random.Generator]:
    """
    Derive independent named random streams from one seed.

    Streams are spawned in the order of `names`, so adding a name at the end never
    changes the streams before it.
    """
    names = list(names)
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}
