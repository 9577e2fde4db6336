"""Permutation arithmetic on the symmetric group S_n for rankeval"""
import hashlib
import itertools
import logging
from dataclasses import dataclass
from math import factorial
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config import EXHAUSTIVE_LIMIT

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


class PermutationError(ValueError):
    """Invalid permutation image or swap indices"""


class DimensionError(ValueError):
    """Operands live in symmetric groups of different sizes"""


class EnumerationLimitError(ValueError):
    """Exhaustive enumeration requested above the configured limit"""


@dataclass(frozen=True)
class Permutation:
    """
    A bijection on {1..n} stored by its 1-based image.

    image[i - 1] is sigma(i), the position assigned to item i.
    """

    image: Tuple[int, ...]

    def __post_init__(self):
        image = tuple(int(v) for v in self.image)
        object.__setattr__(self, "image", image)
        if not image:
            raise PermutationError("A permutation needs n >= 1")
        if not is_valid_image(image):
            raise PermutationError(f"Not a bijection on 1..{len(image)}: {to_text_image(image)}")

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        if not 1 <= i <= self.n:
            raise PermutationError(f"Index {i} outside 1..{self.n}")
        return self.image[i - 1]

    def __str__(self) -> str:
        return to_text_image(self.image)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.image, dtype=np.int64)

    @classmethod
    def from_array(cls, values: Sequence[int]) -> "Permutation":
        return cls(tuple(int(v) for v in values))


@dataclass(frozen=True)
class SwapSpec:
    """Transposition (i j) exchanging positions i and j"""

    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise PermutationError(f"Swap needs two distinct indices, got ({self.i} {self.j})")
        if self.i < 1 or self.j < 1:
            raise PermutationError(f"Swap indices are 1-based, got ({self.i} {self.j})")

    @property
    def width(self) -> int:
        return abs(self.i - self.j)

    def __str__(self) -> str:
        return f"({self.i} {self.j})"


def is_valid_image(values: Sequence[int]) -> bool:
    """Check that values is a bijection on 1..len(values)"""
    return sorted(values) == list(range(1, len(values) + 1))


def to_text_image(values: Sequence[int]) -> str:
    return ",".join(str(int(v)) for v in values)


def from_text(text: str) -> Permutation:
    """
    Parse the comma-separated 1-based image format, e.g. "2,1,3,4,5".

    Args:
        text: Permutation text

    Returns:
        Parsed Permutation

    Raises:
        PermutationError: if the text is not a valid image
    """
    cleaned = text.strip()
    if not cleaned:
        raise PermutationError("Empty permutation text")
    try:
        values = tuple(int(token) for token in cleaned.split(","))
    except ValueError:
        raise PermutationError(f"Permutation text must be comma-separated integers: {cleaned!r}")
    return Permutation(values)


def to_text(sigma: Permutation) -> str:
    return to_text_image(sigma.image)


def identity(n: int) -> Permutation:
    if n < 1:
        raise PermutationError(f"identity needs n >= 1, got {n}")
    return Permutation(tuple(range(1, n + 1)))


def reverse(n: int) -> Permutation:
    """The ranking sigma(i) = n - i + 1"""
    if n < 1:
        raise PermutationError(f"reverse needs n >= 1, got {n}")
    return Permutation(tuple(range(n, 0, -1)))


def _check_same_n(*perms: Permutation) -> int:
    sizes = {p.n for p in perms}
    if len(sizes) != 1:
        raise DimensionError(f"Permutations of different lengths: {sorted(sizes)}")
    return sizes.pop()


def compose(sigma: Permutation, nu: Permutation) -> Permutation:
    """sigma o nu, i.e. i -> sigma(nu(i))"""
    _check_same_n(sigma, nu)
    return Permutation(tuple(sigma.image[v - 1] for v in nu.image))


def inverse(sigma: Permutation) -> Permutation:
    inv = [0] * sigma.n
    for i, value in enumerate(sigma.image, start=1):
        inv[value - 1] = i
    return Permutation(tuple(inv))


def swap(n: int, spec: SwapSpec) -> Permutation:
    if not (1 <= spec.i <= n and 1 <= spec.j <= n):
        raise PermutationError(f"Swap {spec} outside 1..{n}")
    image = list(range(1, n + 1))
    image[spec.i - 1], image[spec.j - 1] = image[spec.j - 1], image[spec.i - 1]
    return Permutation(tuple(image))


def restrict(sigma: Permutation, k: int) -> Tuple[int, ...]:
    """Prefix (sigma(1), ..., sigma(k)); values may exceed k"""
    if not 1 <= k <= sigma.n:
        raise PermutationError(f"Restriction length {k} outside 1..{sigma.n}")
    return sigma.image[:k]


def swaps_of_width(n: int, width: int) -> List[SwapSpec]:
    """All swaps (i i+width) in S_n, ordered by i"""
    return [SwapSpec(i, i + width) for i in range(1, n - width + 1)]


def all_swaps(n: int) -> List[SwapSpec]:
    return [SwapSpec(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]


def fixed_points(sigma: Permutation) -> List[int]:
    return [i for i, value in enumerate(sigma.image, start=1) if i == value]


# ==================== RANDOM STREAMS ====================

def stream_id(*parts) -> int:
    """Stable 64-bit stream identifier from arbitrary labels"""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, stream: int, index: int) -> np.random.Generator:
    """
    Counter-based generator for draw number index of a stream.

    The Philox key carries (seed, stream) and the draw index sits in the top
    word of the counter, so draws never share counter blocks and any draw can
    be regenerated on its own.
    """
    key = ((seed & _MASK64) << 64) | (stream & _MASK64)
    counter = (index & _MASK64) << 192
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def sample_array(n: int, count: int, seed: int, stream: int = 0, start: int = 0) -> np.ndarray:
    """
    Draw uniform permutations as a (count, n) array of 1-based images.

    Row d holds draw start + d, which depends only on (seed, stream, start + d).
    """
    if n < 1:
        raise PermutationError(f"sample_uniform needs n >= 1, got {n}")
    out = np.empty((max(count, 0), n), dtype=np.int64)
    for d in range(max(count, 0)):
        out[d] = rng_for(seed, stream, start + d).permutation(n) + 1
    return out


def sample_uniform(n: int, count: int, seed: int, stream: int = 0) -> List[Permutation]:
    return [Permutation.from_array(row) for row in sample_array(n, count, seed, stream)]


# ==================== ENUMERATION ====================

def _check_limit(n: int, limit: Optional[int]) -> None:
    limit = EXHAUSTIVE_LIMIT if limit is None else limit
    if n < 1:
        raise PermutationError(f"enumerate needs n >= 1, got {n}")
    if n > limit:
        raise EnumerationLimitError(
            f"Exhaustive enumeration of S_{n} ({factorial(n)} elements) exceeds the limit n <= {limit}"
        )


def iter_permutations(n: int, limit: Optional[int] = None) -> Iterator[Permutation]:
    _check_limit(n, limit)
    for image in itertools.permutations(range(1, n + 1)):
        yield Permutation(image)


def enumerate_permutations(n: int, limit: Optional[int] = None) -> List[Permutation]:
    """All n! elements of S_n in lexicographic order"""
    return list(iter_permutations(n, limit))


def enumerate_array(n: int, limit: Optional[int] = None) -> np.ndarray:
    """All n! elements of S_n as a (n!, n) array, lexicographic order"""
    _check_limit(n, limit)
    logger.debug(f"Enumerating S_{n} ({factorial(n)} elements)")
    return np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64).reshape(-1, n)


# ==================== BATCH HELPERS ====================

def compose_arrays(sigma: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Row-wise sigma o nu for (m, n) image arrays"""
    sigma = np.atleast_2d(sigma)
    nu = np.atleast_2d(nu)
    if sigma.shape[-1] != nu.shape[-1]:
        raise DimensionError(f"Permutations of different lengths: {sigma.shape[-1]} vs {nu.shape[-1]}")
    sigma, nu = np.broadcast_arrays(sigma, nu)
    return np.take_along_axis(sigma, nu - 1, axis=1)


def swap_array(n: int, i: int, j: int) -> np.ndarray:
    return swap(n, SwapSpec(i, j)).as_array()
