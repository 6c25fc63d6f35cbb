"""Position-independent similarity between a level and an action.

Both sides are cut into every 3x3 window, windows that are entirely empty are
dropped, and the two patch collections are intersected as multisets (a patch
on one side can match at most one identical patch on the other).  The score
is the matched count divided by the number of action patches, so it lives in
[0, 1] and reaches 1 exactly when every action patch finds a partner.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from . import tilegrid
from .errors import EmptyAction
from .tilegrid import ChangeSet, TileGrid


@dataclass(frozen=True)
class OverlapResult:
    matched: int
    action_patches: int
    level_patches: int

    @property
    def ratio(self) -> float:
        return self.matched / self.action_patches


def local_overlap_ratio(level: TileGrid, action: TileGrid) -> OverlapResult:
    """Multiset intersection of non-empty 3x3 patches, normalized by the action."""
    level_patches = tilegrid.extract_patches(level)
    action_patches = tilegrid.extract_patches(action)
    if not action_patches:
        raise EmptyAction("action has no non-empty 3x3 patches")
    matched = sum((Counter(level_patches) & Counter(action_patches)).values())
    return OverlapResult(
        matched=matched,
        action_patches=len(action_patches),
        level_patches=len(level_patches),
    )


def overlap_with_changes(
    level: TileGrid, changes: ChangeSet, width: int, height: int
) -> OverlapResult:
    """Score a level against an action given as a ChangeSet.

    The changes are rendered onto an empty canvas first, so only the placed
    content (not the level it was applied to) participates in matching.
    """
    return local_overlap_ratio(level, tilegrid.changeset_to_grid(changes, width, height))
