"""Independent reference implementations used to check the library.

Everything here is deliberately written from first principles (plain loops,
no shared helpers with the package) so a bug in the library cannot hide in
its own oracle.
"""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Sequence, Set, Tuple


# --- radius of gyration -----------------------------------------------------

def _hav(lat1, lon1, lat2, lon2):
    r = 6_371_000.0
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * r * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))


def gyration_direct(points: Sequence[Tuple[float, float]], weights: Sequence[int], planar: bool) -> float:
    """Direct summation of the weighted RMS distance from the centroid."""
    if len(points) == 1:
        return 0.0  # centroid coincides with the point; avoids trig round-off
    n_total = float(sum(weights))
    if planar:
        cx = sum(w * p[0] for p, w in zip(points, weights)) / n_total
        cy = sum(w * p[1] for p, w in zip(points, weights)) / n_total
        acc = sum(w * ((p[0] - cx) ** 2 + (p[1] - cy) ** 2) for p, w in zip(points, weights))
        return math.sqrt(acc / n_total)
    # spherical centroid via cartesian average
    sx = sy = sz = 0.0
    for (lat, lon), w in zip(points, weights):
        phi = math.radians(lat)
        lam = math.radians(lon)
        sx += w * math.cos(phi) * math.cos(lam)
        sy += w * math.cos(phi) * math.sin(lam)
        sz += w * math.sin(phi)
    norm = math.sqrt(sx * sx + sy * sy + sz * sz)
    clat = math.degrees(math.asin(sz / norm))
    clon = math.degrees(math.atan2(sy, sx))
    acc = sum(w * _hav(lat, lon, clat, clon) ** 2 for (lat, lon), w in zip(points, weights))
    return math.sqrt(acc / n_total)


def k_gyration_direct(
    points: Sequence[Tuple[float, float]],
    weights: Sequence[int],
    ids: Sequence[str],
    k: int,
    planar: bool,
) -> float:
    """Same statistic over the k most-visited points (ties by id)."""
    ranked = sorted(range(len(points)), key=lambda i: (-weights[i], ids[i]))
    keep = set(ranked[:k])
    pts = [points[i] for i in range(len(points)) if i in keep]
    wts = [weights[i] for i in range(len(points)) if i in keep]
    if len(pts) == 1:
        return 0.0
    return gyration_direct(pts, wts, planar)


# --- 1-D two-means -----------------------------------------------------------

def kmeans2_brute(values: Sequence[float]) -> Tuple[List[int], Tuple[float, float]]:
    """Exhaustive contiguous-split scan with per-split direct summation.

    O(n^2); for each of the n-1 splits of the sorted values the within-cluster
    sum of squares is computed from scratch.  Leftmost minimum wins.
    """
    order = sorted(range(len(values)), key=lambda i: values[i])
    s = [values[i] for i in order]
    n = len(s)
    best_cost = None
    best_split = None
    for split in range(1, n):
        left = s[:split]
        right = s[split:]
        ml = sum(left) / len(left)
        mr = sum(right) / len(right)
        cost = sum((x - ml) ** 2 for x in left) + sum((x - mr) ** 2 for x in right)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best_split = split
    labels = [0] * n
    for rank, orig in enumerate(order):
        labels[orig] = 0 if rank < best_split else 1
    left = s[:best_split]
    right = s[best_split:]
    return labels, (sum(left) / len(left), sum(right) / len(right))


def kmeans2_welford(values: Sequence[float]) -> Tuple[List[int], Tuple[float, float]]:
    """Exhaustive split scan with running (Welford) sums of squares.

    O(n); algorithmically unlike both the brute-force oracle and the
    library's prefix-sum scan.
    """
    order = sorted(range(len(values)), key=lambda i: values[i])
    s = [values[i] for i in order]
    n = len(s)
    fwd = [0.0] * (n + 1)  # WCSS of s[:i]
    mean = 0.0
    m2 = 0.0
    for i, x in enumerate(s, start=1):
        delta = x - mean
        mean += delta / i
        m2 += delta * (x - mean)
        fwd[i] = m2
    bwd = [0.0] * (n + 1)  # WCSS of s[i:]
    mean = 0.0
    m2 = 0.0
    for count, x in enumerate(reversed(s), start=1):
        delta = x - mean
        mean += delta / count
        m2 += delta * (x - mean)
        bwd[n - count] = m2
    best_split = 1
    best_cost = fwd[1] + bwd[1]
    for split in range(2, n):
        cost = fwd[split] + bwd[split]
        if cost < best_cost:
            best_cost = cost
            best_split = split
    labels = [0] * n
    for rank, orig in enumerate(order):
        labels[orig] = 0 if rank < best_split else 1
    left = s[:best_split]
    right = s[best_split:]
    return labels, (sum(left) / len(left), sum(right) / len(right))


# --- pairwise interval-overlap exposures --------------------------------------

def exposures_quadratic(
    presences: Sequence[Tuple[str, str, float, float]], d_t: float
) -> List[Tuple[str, str, str, float, float, str, float, float]]:
    """All exposure events by checking every ordered presence pair.

    Each presence is (card, vehicle, enter, exit).  Returns one tuple of
    (source, target, vehicle, start, end, kind, source_enter, source_exit)
    per exposing presence pair, duplicates included.
    """
    out = []
    for (c1, v1, a, b) in presences:
        for (c2, v2, c, d) in presences:
            if v1 != v2 or c1 == c2:
                continue
            if c <= b and d >= a:
                out.append((c1, c2, v1, max(a, c), min(b, d), "direct", a, b))
            elif b < c <= b + d_t:
                out.append((c1, c2, v1, c, min(d, b + d_t), "indirect", a, b))
    return out


def direct_degree_quadratic(
    presences: Sequence[Tuple[str, str, float, float]]
) -> Dict[str, int]:
    """Direct co-presence episode count per card, O(n^2)."""
    degrees: Dict[str, int] = {}
    items = list(presences)
    for i, (c1, v1, a, b) in enumerate(items):
        for c2, v2, c, d in items[i + 1:]:
            if v1 != v2 or c1 == c2:
                continue
            if c <= b and d >= a:
                degrees[c1] = degrees.get(c1, 0) + 1
                degrees[c2] = degrees.get(c2, 0) + 1
    return degrees


def component_sizes_bfs(cards: Iterable[str], edges: Iterable[Tuple[str, str]]) -> List[int]:
    """Connected component sizes via plain BFS, largest first."""
    adjacency: Dict[str, Set[str]] = {c: set() for c in cards}
    for u, v in edges:
        adjacency.setdefault(u, set()).add(v)
        adjacency.setdefault(v, set()).add(u)
    seen: Set[str] = set()
    sizes: List[int] = []
    for node in adjacency:
        if node in seen:
            continue
        queue = [node]
        seen.add(node)
        size = 0
        while queue:
            cur = queue.pop()
            size += 1
            for nxt in adjacency[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        sizes.append(size)
    return sorted(sizes, reverse=True)


# --- temporal reachability ----------------------------------------------------

def reachable_infections(
    exposures: Sequence[Tuple[str, str, float, float, str, float, float]],
    seeds: Iterable[str],
    start_time: float,
    infectious_period: float,
    end_time: float,
) -> Dict[str, float]:
    """Earliest infection times at transmission probability 1.

    Exposures are (source, target, start, end, kind, source_enter,
    source_exit).  Repeatedly finds the globally earliest feasible
    transmission to a still-uninfected target and commits it; this is exact
    because infection times never decrease along the chain.
    """
    infected: Dict[str, float] = {s: start_time for s in seeds}
    while True:
        best = None
        for (src, tgt, s, e, kind, dep_a, dep_b) in exposures:
            if src not in infected or tgt in infected:
                continue
            t_src = infected[src]
            recovery = t_src + infectious_period
            if kind == "direct":
                feasible = t_src <= e and recovery > s
            else:
                feasible = t_src <= dep_b and recovery > dep_a
            if not feasible:
                continue
            t_star = max(s, t_src)
            if t_star > end_time:
                continue
            if best is None or t_star < best[0]:
                best = (t_star, tgt)
        if best is None:
            return infected
        infected[best[1]] = best[0]
