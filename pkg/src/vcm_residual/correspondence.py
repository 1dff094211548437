"""
One-to-one correspondence between original-frame and decoded-frame keypoints.

Each original keypoint ends up in exactly one of SAME / MOVED / MISSED and
each decoded keypoint in SAME / MOVED / NEW. Matched pairs carry a 5-bit mask
naming the parameters that would have to be transmitted to restore the
original.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

from .errors import InvalidParams
from .sift import FIELDS, Keypoint, KeypointSet, grid


class Category(enum.Enum):
    SAME = "same"
    MOVED = "moved"
    MISSED = "missed"
    NEW = "new"


class SameRule(enum.Enum):
    LITERAL = "literal"  # one sample along a single axis
    CHEBYSHEV1 = "chebyshev1"  # any displacement with both |dx|, |dy| <= 1


class Param(enum.IntFlag):
    X = 1
    Y = 2
    SIZE = 4
    ORIENTATION = 8
    RESPONSE = 16


ALL_PARAMS = 0b11111


def mask_fields(mask: int) -> list[str]:
    return [name for bit, name in enumerate(FIELDS) if mask >> bit & 1]


@dataclass(frozen=True)
class MatchConfig:
    window_radius: int = 3
    tolerance: float = 0.05
    orientation_tolerance: float = 18.0
    zero_epsilon: float = 1e-6
    same_rule: SameRule = SameRule.LITERAL

    def __post_init__(self):
        if self.window_radius < 1:
            raise InvalidParams("window_radius must be >= 1")
        if not self.tolerance >= 0:
            raise InvalidParams("tolerance must be >= 0")
        if not 0 <= self.orientation_tolerance <= 180:
            raise InvalidParams("orientation_tolerance must lie in [0, 180]")
        if not self.zero_epsilon > 0:
            raise InvalidParams("zero_epsilon must be > 0")


class Pair(NamedTuple):
    orig_index: int
    dec_index: int
    category: Category
    param_mask: int


@dataclass(frozen=True)
class MatchReport:
    pairs: tuple[Pair, ...]
    missed: tuple[int, ...]
    new: tuple[int, ...]
    n_orig: int
    n_dec: int

    def __post_init__(self):
        oi = [p.orig_index for p in self.pairs]
        di = [p.dec_index for p in self.pairs]
        if len(set(oi)) != len(oi) or len(set(di)) != len(di):
            raise InvalidParams("pairs are not one-to-one")
        if len(self.pairs) + len(self.missed) != self.n_orig or len(self.pairs) + len(self.new) != self.n_dec:
            raise InvalidParams("partition identities violated")
        if set(oi) & set(self.missed) or set(di) & set(self.new):
            raise InvalidParams("keypoint classified twice")

    def count(self, category: Category) -> int:
        if category is Category.MISSED:
            return len(self.missed)
        if category is Category.NEW:
            return len(self.new)
        return sum(1 for p in self.pairs if p.category is category)

    def counts(self) -> dict[Category, int]:
        return {c: self.count(c) for c in Category}


def circular_difference(a: float, b: float) -> float:
    """Shortest arc between two angles in degrees, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def categorize(orig_kp: Keypoint, dec_kp: Keypoint, rule: SameRule = SameRule.LITERAL) -> Category:
    rx = grid(dec_kp.x) - grid(orig_kp.x)
    ry = grid(dec_kp.y) - grid(orig_kp.y)
    if rule is SameRule.CHEBYSHEV1:
        same = abs(rx) <= 1 and abs(ry) <= 1
    else:
        same = (abs(rx) <= 1 and ry == 0) or (rx == 0 and abs(ry) <= 1)
    return Category.SAME if same else Category.MOVED


def _relative_change(orig: float, dec: float, eps: float) -> float:
    return abs(dec - orig) / max(abs(orig), eps)


def param_deltas(
    orig_kp: Keypoint,
    dec_kp: Keypoint,
    category: Category,
    cfg: MatchConfig = MatchConfig(),
    exact: bool = False,
) -> int:
    """Mask of parameters to transmit for a matched pair.

    With ``exact`` every parameter that differs at all is flagged, including
    sub-sample position changes of SAME pairs.
    """
    mask = 0
    if category is Category.MOVED:
        mask |= Param.X | Param.Y
    elif exact:
        if dec_kp.x != orig_kp.x:
            mask |= Param.X
        if dec_kp.y != orig_kp.y:
            mask |= Param.Y
    if exact:
        if dec_kp.size != orig_kp.size:
            mask |= Param.SIZE
        if dec_kp.orientation != orig_kp.orientation:
            mask |= Param.ORIENTATION
        if dec_kp.response != orig_kp.response:
            mask |= Param.RESPONSE
        return int(mask)
    eps = cfg.zero_epsilon
    if _relative_change(orig_kp.size, dec_kp.size, eps) > cfg.tolerance:
        mask |= Param.SIZE
    if circular_difference(orig_kp.orientation, dec_kp.orientation) > cfg.orientation_tolerance:
        mask |= Param.ORIENTATION
    if _relative_change(orig_kp.response, dec_kp.response, eps) > cfg.tolerance:
        mask |= Param.RESPONSE
    return int(mask)


def candidate_pairs(orig: KeypointSet, dec: KeypointSet, radius: int) -> list[tuple[tuple, int, int]]:
    """All (sort key, orig index, dec index) within the rounded Chebyshev window."""
    cells: dict[tuple[int, int], list[int]] = defaultdict(list)
    for j, kp in enumerate(dec):
        cells[(grid(kp.x), grid(kp.y))].append(j)
    out = []
    for i, o in enumerate(orig):
        gx, gy = grid(o.x), grid(o.y)
        for cy in range(gy - radius, gy + radius + 1):
            for cx in range(gx - radius, gx + radius + 1):
                for j in cells.get((cx, cy), ()):
                    d = dec[j]
                    cost = (d.x - o.x) ** 2 + (d.y - o.y) ** 2
                    key = (cost, abs(d.size - o.size), abs(d.response - o.response), i, j)
                    out.append((key, i, j))
    return out


def match_sets(orig: KeypointSet, dec: KeypointSet, cfg: MatchConfig = MatchConfig()) -> MatchReport:
    """Greedy ascending-cost one-to-one matching inside the window.

    Cost is squared Euclidean distance on fractional positions; ties fall to
    (|dsize|, |dresponse|, orig index, dec index).
    """
    taken_o: set[int] = set()
    taken_d: set[int] = set()
    pairs = []
    for _, i, j in sorted(candidate_pairs(orig, dec, cfg.window_radius)):
        if i in taken_o or j in taken_d:
            continue
        taken_o.add(i)
        taken_d.add(j)
        cat = categorize(orig[i], dec[j], cfg.same_rule)
        pairs.append(Pair(i, j, cat, param_deltas(orig[i], dec[j], cat, cfg)))
    pairs.sort()
    missed = tuple(i for i in range(len(orig)) if i not in taken_o)
    new = tuple(j for j in range(len(dec)) if j not in taken_d)
    return MatchReport(tuple(pairs), missed, new, len(orig), len(dec))


def unchanged_param_histogram(report: MatchReport, category: Category) -> list[int]:
    """Counts of pairs in ``category`` by number of unchanged parameters (0..5)."""
    hist = [0] * 6
    for p in report.pairs:
        if p.category is category:
            hist[5 - bin(p.param_mask).count("1")] += 1
    return hist
