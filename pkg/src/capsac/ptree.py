"""Spatial partition trees: axis-aligned binary splits whose leaves are the sub-regions.

Nodes are immutable.  A node's ``rect`` is always the tight bounding box of the
photos it owns.  ``split`` is a global column (``axis='lng'``) or row
(``axis='lat'``) index; the left/lower child receives coordinates <= split.
Nodes are addressed by paths: tuples of 0 (left) and 1 (right) from the root.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

from .geosum import GeoSums
from .model import Instance, Rect

AXES = ("lng", "lat")
Path = Tuple[int, ...]


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class TreeNode:
    rect: Rect
    axis: Optional[str] = None
    split: Optional[int] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    n_leaves: int = field(init=False, compare=False)

    def __post_init__(self):
        n = 1 if self.left is None else self.left.n_leaves + self.right.n_leaves
        object.__setattr__(self, "n_leaves", n)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def child(self, side: int) -> "TreeNode":
        return self.right if side else self.left


@dataclass(frozen=True)
class PartitionTree:
    root: TreeNode
    leaves: Tuple[TreeNode, ...] = field(init=False, compare=False)
    leaf_paths: Tuple[Path, ...] = field(init=False, compare=False)
    depth: int = field(init=False, compare=False)

    def __post_init__(self):
        leaves, paths = [], []
        depth = 0
        for path, node in walk(self.root):
            depth = max(depth, len(path))
            if node.is_leaf:
                leaves.append(node)
                paths.append(path)
        object.__setattr__(self, "leaves", tuple(leaves))
        object.__setattr__(self, "leaf_paths", tuple(paths))
        object.__setattr__(self, "depth", depth)

    @property
    def m(self) -> int:
        return len(self.leaves)

    @property
    def regions(self) -> List[Rect]:
        return [leaf.rect for leaf in self.leaves]

    def node_at(self, path: Path) -> TreeNode:
        node = self.root
        for side in path:
            if node.is_leaf:
                raise TreeError(f"no node at path {path}")
            node = node.child(side)
        return node

    def internal_paths(self) -> List[Path]:
        return [p for p, n in walk(self.root) if not n.is_leaf]


@dataclass(frozen=True)
class HyperplaneMove:
    path: Path
    axis: str
    split: int
    old_axis: str
    old_split: int

    def reverse(self) -> "HyperplaneMove":
        return HyperplaneMove(self.path, self.old_axis, self.old_split, self.axis, self.split)


def walk(node: TreeNode, path: Path = ()) -> Iterator[Tuple[Path, TreeNode]]:
    """Pre-order traversal, left child first."""
    yield path, node
    if not node.is_leaf:
        yield from walk(node.left, path + (0,))
        yield from walk(node.right, path + (1,))


# -- geometry -----------------------------------------------------------------


def halves(rect: Rect, axis: str, k: int) -> Tuple[Rect, Rect]:
    if axis == "lng":
        return Rect(rect.c_lt, k, rect.l_lo, rect.l_hi), Rect(k + 1, rect.c_gt, rect.l_lo, rect.l_hi)
    return Rect(rect.c_lt, rect.c_gt, rect.l_lo, k), Rect(rect.c_lt, rect.c_gt, k + 1, rect.l_hi)


def split_ok(rect: Rect, axis: str, k: int) -> bool:
    # rect is tight, so both sides keep a photo exactly when k is strictly inside it
    if axis == "lng":
        return rect.c_lt <= k < rect.c_gt
    return rect.l_lo <= k < rect.l_hi


def split_options(g: GeoSums, rect: Rect) -> Dict[str, List[int]]:
    """Canonical split indices per axis: every occupied coordinate except the last."""
    out = {}
    for axis in AXES:
        occ = g.occupied(rect, axis)
        if len(occ) > 1:
            out[axis] = occ[:-1]
    return out


def canonical(g: GeoSums, rect: Rect, axis: str, k: int) -> int:
    """Largest occupied coordinate <= k; splits with equal canonical index are identical."""
    return max(c for c in g.occupied(rect, axis) if c <= k)


def split_node(g: GeoSums, rect: Rect, axis: str, k: int) -> Tuple[Rect, Rect]:
    lo, hi = halves(rect, axis, k)
    return g.tighten(lo), g.tighten(hi)


# -- construction ---------------------------------------------------------------


class _Draft:
    __slots__ = ("rect", "axis", "split", "kids", "options")

    def __init__(self, rect: Rect, g: GeoSums):
        self.rect = rect
        self.axis = None
        self.split = None
        self.kids = None
        self.options = split_options(g, rect)

    def freeze(self) -> TreeNode:
        if self.kids is None:
            return TreeNode(self.rect)
        return TreeNode(self.rect, self.axis, self.split, self.kids[0].freeze(), self.kids[1].freeze())


def grow(g: GeoSums, rect: Rect, n_leaves: int, rng: random.Random) -> TreeNode:
    """Random splitting steps from a single leaf over ``rect`` until ``n_leaves`` leaves exist.

    Each step picks a splittable leaf, then an admissible axis, then an index,
    each uniformly.
    """
    root = _Draft(rect, g)
    leaves = [root]
    for _ in range(n_leaves - 1):
        splittable = [i for i, d in enumerate(leaves) if d.options]
        if not splittable:
            raise TreeError(f"cannot form {n_leaves} nonempty leaves")
        i = rng.choice(splittable)
        d = leaves[i]
        axis = rng.choice(sorted(d.options))
        k = rng.choice(d.options[axis])
        lo, hi = split_node(g, d.rect, axis, k)
        d.axis, d.split = axis, k
        d.kids = (_Draft(lo, g), _Draft(hi, g))
        leaves[i : i + 1] = list(d.kids)
    return root.freeze()


def random_tree(g: GeoSums, m: int, rng: random.Random) -> PartitionTree:
    full = Rect(0, g.n_cols - 1, 0, g.n_rows - 1)
    cells = g.region_cells(full)
    if cells < m:
        raise TreeError(f"cannot form {m} nonempty leaves from {cells} occupied cells")
    return PartitionTree(grow(g, g.tighten(full), m, rng))


def random_tree_for(inst: Instance, rng: random.Random, g: Optional[GeoSums] = None) -> PartitionTree:
    return random_tree(g if g is not None else GeoSums(inst), inst.m, rng)


def _replace(node: TreeNode, path: Path, new: TreeNode) -> TreeNode:
    if not path:
        return new
    side, rest = path[0], path[1:]
    if side:
        return TreeNode(node.rect, node.axis, node.split, node.left, _replace(node.right, rest, new))
    return TreeNode(node.rect, node.axis, node.split, _replace(node.left, rest, new), node.right)


def reconstruct_subtree(g: GeoSums, tree: PartitionTree, path: Path, rng: random.Random) -> PartitionTree:
    """Rebuild the sub-tree at ``path`` randomly, keeping its leaf count."""
    node = tree.node_at(path)
    if node.is_leaf:
        raise TreeError("cannot reconstruct a leaf")
    return PartitionTree(_replace(tree.root, path, grow(g, node.rect, node.n_leaves, rng)))


# -- hyperplane reallocation ---------------------------------------------------------


def _rebuild(g: GeoSums, node: TreeNode, rect: Rect, axis: str, k: int) -> Optional[TreeNode]:
    """Re-split ``rect`` on (axis, k) keeping descendants' own splits; None if a leaf empties."""
    if not split_ok(rect, axis, k):
        return None
    lo, hi = split_node(g, rect, axis, k)
    kids = []
    for child, sub in ((node.left, lo), (node.right, hi)):
        if child.is_leaf:
            kids.append(TreeNode(sub))
            continue
        new = _rebuild(g, child, sub, child.axis, child.split)
        if new is None:
            return None
        kids.append(new)
    return TreeNode(rect, axis, k, kids[0], kids[1])


def _candidate_moves(g: GeoSums, tree: PartitionTree, path: Path):
    top = tree.node_at(path)
    for sub, node in walk(top, path):
        if node.is_leaf:
            continue
        current = (node.axis, canonical(g, node.rect, node.axis, node.split))
        for axis, ks in sorted(split_options(g, node.rect).items()):
            for k in ks:
                if (axis, k) == current:
                    continue
                new = _rebuild(g, node, node.rect, axis, k)
                if new is not None:
                    yield HyperplaneMove(sub, axis, k, node.axis, node.split), new


def enumerate_hyperplane_moves(g: GeoSums, tree: PartitionTree, path: Path) -> List[HyperplaneMove]:
    """Every admissible (axis, index) change on non-leaf nodes below ``path``.

    Order: target pre-order, then axis, then index.  The target's current split
    (up to canonical equivalence) is excluded.
    """
    return [move for move, _ in _candidate_moves(g, tree, path)]


def hyperplane_neighbors(g: GeoSums, tree: PartitionTree, path: Path) -> Iterator[Tuple[HyperplaneMove, PartitionTree]]:
    """Lazily pairs each move of ``enumerate_hyperplane_moves`` with the tree it produces."""
    for move, node in _candidate_moves(g, tree, path):
        yield move, PartitionTree(_replace(tree.root, move.path, node))


def apply_hyperplane_move(g: GeoSums, tree: PartitionTree, move: HyperplaneMove) -> PartitionTree:
    try:
        node = tree.node_at(move.path)
    except TreeError:
        raise TreeError("stale move") from None
    if node.is_leaf or (node.axis, node.split) != (move.old_axis, move.old_split):
        raise TreeError("stale move")
    new = _rebuild(g, node, node.rect, move.axis, move.split)
    if new is None:
        raise TreeError("stale move")
    return PartitionTree(_replace(tree.root, move.path, new))


# -- inspection ------------------------------------------------------------------


def leaf_parents(tree: PartitionTree, leaf_positions) -> List[Path]:
    """Distinct parent paths of the given leaves, in pre-order."""
    wanted = {tree.leaf_paths[i][:-1] for i in leaf_positions if tree.leaf_paths[i]}
    return [p for p in tree.internal_paths() if p in wanted]


def internal_at_depth(tree: PartitionTree, depth: int) -> List[Path]:
    return [p for p in tree.internal_paths() if len(p) == depth]


def dump(tree: PartitionTree) -> str:
    """Deterministic pre-order rendering for golden tests and debugging."""
    lines = []
    for path, node in walk(tree.root):
        r = node.rect
        box = f"c[{r.c_lt},{r.c_gt}] l[{r.l_lo},{r.l_hi}]"
        label = "leaf" if node.is_leaf else f"{node.axis}<={node.split}"
        lines.append("  " * len(path) + f"{box} {label}")
    return "\n".join(lines) + "\n"
