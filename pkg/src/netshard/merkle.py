"""Binary SHA-256 Merkle trees with leaf/node domain separation.

Leaves hash as ``H(0x00 || leaf)``, interior nodes as ``H(0x01 || l || r)``.
An odd node at any level is paired with itself.  The empty tree commits to
``H(b"")``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

EMPTY_ROOT = hashlib.sha256(b"").digest()
LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"


def leaf_hash(leaf: bytes) -> bytes:
    return hashlib.sha256(LEAF_PREFIX + leaf).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(NODE_PREFIX + left + right).digest()


def proof_depth(leaf_count: int) -> int:
    """Number of siblings in a proof: ceil(log2(leaf_count)), 0 for one leaf."""
    return (leaf_count - 1).bit_length() if leaf_count > 1 else 0


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    siblings: tuple[bytes, ...]
    leaf_count: int


class MerkleTree:
    """All levels of a tree, kept so many proofs can be cut from one build."""

    def __init__(self, leaves: Sequence[bytes]):
        self.leaf_count = len(leaves)
        level = [leaf_hash(x) for x in leaves]
        self.levels = [level]
        while len(level) > 1:
            if len(level) % 2:
                level = level + [level[-1]]
            level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
            self.levels.append(level)

    @property
    def root(self) -> bytes:
        if not self.leaf_count:
            return EMPTY_ROOT
        return self.levels[-1][0]

    def prove(self, index: int) -> MerkleProof:
        if not 0 <= index < self.leaf_count:
            raise IndexError(f"leaf index {index} out of range for {self.leaf_count} leaves")
        siblings = []
        i = index
        for level in self.levels[:-1]:
            j = i ^ 1
            siblings.append(level[j] if j < len(level) else level[i])
            i //= 2
        return MerkleProof(index, tuple(siblings), self.leaf_count)


def build_root(leaves: Sequence[bytes]) -> bytes:
    return MerkleTree(leaves).root


def prove(leaves: Sequence[bytes], index: int) -> MerkleProof:
    return MerkleTree(leaves).prove(index)


def verify(root: bytes, leaf: bytes, proof: MerkleProof) -> bool:
    n = proof.leaf_count
    if n < 1 or not 0 <= proof.leaf_index < n:
        return False
    if len(proof.siblings) != proof_depth(n):
        return False
    h = leaf_hash(leaf)
    i = proof.leaf_index
    for sib in proof.siblings:
        if len(sib) != 32:
            return False
        h = node_hash(h, sib) if i % 2 == 0 else node_hash(sib, h)
        i //= 2
    return h == root


# -- commitments over protocol objects ----------------------------------------


@dataclass(frozen=True)
class StateCommitment:
    state_root: bytes
    event_root: bytes


def state_tree(state) -> MerkleTree:
    from .codec import state_leaves

    return MerkleTree(state_leaves(state))


def commit_state(state) -> bytes:
    """Root over every cell, outstanding-credit entry, user balance and the header."""
    return state_tree(state).root


def event_leaves(events) -> list[bytes]:
    from .codec import encode_event

    return [encode_event(e) for e in events]


def commit_events(events) -> bytes:
    return build_root(event_leaves(events))


def prove_cell(tree: MerkleTree, row: int, col: int, ees: int) -> MerkleProof:
    from .codec import cell_leaf_index

    return tree.prove(cell_leaf_index(row, col, ees))


def verify_cell(root: bytes, row: int, col: int, ees: int, cell, proof: MerkleProof) -> bool:
    """Check a cell against a state root, pinning it to its (row, col) position."""
    from .codec import cell_leaf, cell_leaf_index

    if proof.leaf_index != cell_leaf_index(row, col, ees):
        return False
    return verify(root, cell_leaf(row, col, cell), proof)
