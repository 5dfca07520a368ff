"""Collision-resistant hashing of data points, models, and hash sets.

The hash is an MiMC-style permutation (x -> x^5 over the scalar field,
Miyaguchi-Preneel chaining) so the exact same computation can be replayed
inside an R1CS circuit.  Three structures are built on top of it:

* ``hash_data``     -- Merkle tree over the ordered training-set digests,
* ``hash_unlearn``  -- append-only chain over the unlearnt-set digests,
* ``compute_tree_path`` / ``verify_tree_path`` -- membership paths in the
  chain (path = intermediate root below the target plus every digest
  appended after it).

Distinct tag constants separate the unary hash, the binary hash, and the
empty-chain base so a crafted data point cannot collide with the chain
base.  All functions are pure.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .field import BN254_SCALAR_FIELD

MAX_UID = 2**64 - 1

DEFAULT_ROUNDS = 110  # ceil(log5(2^254)) rounds for the x^5 round function


def _tag(label: str, modulus: int = BN254_SCALAR_FIELD) -> int:
    digest = hashlib.sha256(b"unlearn.tag." + label.encode()).digest()
    return int.from_bytes(digest, "big") % modulus


class NotMemberError(KeyError):
    """The data point's digest does not occur in the unlearnt set."""


class EmptyModelError(ValueError):
    """hash_model requires at least one parameter."""


@dataclass(frozen=True)
class HashConfig:
    modulus: int = BN254_SCALAR_FIELD
    rounds: int = DEFAULT_ROUNDS

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be positive")

    @property
    def tag_leaf(self) -> int:
        return _tag("hash1", self.modulus)

    @property
    def tag_node(self) -> int:
        return _tag("hash2", self.modulus)

    @property
    def tag_empty(self) -> int:
        return _tag("empty-chain-base", self.modulus)


@lru_cache(maxsize=None)
def round_constants(modulus: int, rounds: int) -> tuple[int, ...]:
    cs = [0]
    for i in range(1, rounds):
        digest = hashlib.sha256(b"unlearn.mimc.v1.%d" % i).digest()
        cs.append(int.from_bytes(digest, "big") % modulus)
    return tuple(cs)


def mimc_permute(x: int, key: int, cfg: HashConfig) -> int:
    """Keyed permutation: rounds of t -> (t + key + c_i)^5, then t + key."""
    p = cfg.modulus
    t = x % p
    key %= p
    for c in round_constants(p, cfg.rounds):
        u = (t + key + c) % p
        u2 = u * u % p
        t = u2 * u2 % p * u % p
    return (t + key) % p


def _compress(key: int, message: int, cfg: HashConfig) -> int:
    # Miyaguchi-Preneel: H = E_k(m) + k + m.
    p = cfg.modulus
    return (mimc_permute(message, key, cfg) + key + message) % p


def hash1(v: int, cfg: HashConfig) -> int:
    return _compress(cfg.tag_leaf, v % cfg.modulus, cfg)


def hash2(l: int, r: int, cfg: HashConfig) -> int:
    return _compress((l + cfg.tag_node) % cfg.modulus, r % cfg.modulus, cfg)


def empty_root(cfg: HashConfig) -> int:
    """hash of the designated empty sentinel: base of both structures."""
    return _compress(cfg.tag_empty, 0, cfg)


@dataclass(frozen=True)
class DataPoint:
    """d = (uid, x, y): a uniquely identified, fixed-point-encoded sample."""

    uid: int
    x: tuple[int, ...]
    y: int

    def __post_init__(self) -> None:
        if not 0 <= self.uid <= MAX_UID:
            raise ValueError("uid must fit in 64 bits")
        object.__setattr__(self, "x", tuple(self.x))


def hash_data_point(d: DataPoint, cfg: HashConfig) -> int:
    h = hash1(d.uid, cfg)
    for xj in d.x:
        h = hash2(h, hash1(xj, cfg), cfg)
    return hash2(h, hash1(d.y, cfg), cfg)


def hash_model_weights(weights: Sequence[int], cfg: HashConfig) -> int:
    if not weights:
        raise EmptyModelError("model has no parameters")
    h = hash1(weights[0], cfg)
    for w in weights[1:]:
        h = hash2(h, hash1(w, cfg), cfg)
    return h


def hash_model(model, cfg: HashConfig) -> int:
    """Hash a model's weights in their canonical flattened order."""
    return hash_model_weights(model.weights, cfg)


def hash_data(items: Sequence[int], cfg: HashConfig) -> int:
    """Merkle-tree root of an ordered digest list.

    Adjacent nodes pair left-to-right; an odd trailing node is carried up
    unhashed.  The empty list hashes to the empty-root constant.
    """
    if not items:
        return empty_root(cfg)
    level = [v % cfg.modulus for v in items]
    while len(level) > 1:
        nxt = [hash2(level[i], level[i + 1], cfg) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def hash_unlearn(items: Sequence[int], cfg: HashConfig) -> int:
    """Append-only chain root: psi <- hash2(psi, h) folded over the list."""
    psi = empty_root(cfg)
    for h in items:
        psi = hash2(psi, h % cfg.modulus, cfg)
    return psi


@dataclass(frozen=True)
class MembershipPath:
    """Chain membership proof: sub-root below the target, then the digests
    appended after it, in order."""

    nodes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("membership path must be non-empty")
        object.__setattr__(self, "nodes", tuple(self.nodes))


def compute_tree_path(d: DataPoint, hu: Sequence[int], cfg: HashConfig) -> MembershipPath:
    h_d = hash_data_point(d, cfg)
    try:
        idx = list(hu).index(h_d)
    except ValueError:
        raise NotMemberError(f"uid {d.uid} was never unlearnt") from None
    return MembershipPath((hash_unlearn(hu[:idx], cfg), *hu[idx + 1 :]))


def verify_tree_path(
    d: DataPoint, root: int, path: MembershipPath, cfg: HashConfig
) -> bool:
    psi = hash2(path.nodes[0], hash_data_point(d, cfg), cfg)
    for node in path.nodes[1:]:
        psi = hash2(psi, node, cfg)
    return psi == root
