"""Charts, atlases and transition maps.

Everything that moves a point between coordinate systems goes through this
module.  Points travel as :class:`PointRef` (chart id + coordinate tuple);
chart domains are axis-aligned open boxes, optionally narrowed by a
predicate, and angle axes are reduced into a half-open fundamental interval.
"""

from __future__ import annotations

import itertools
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import NoPath, OutOfDomain, OutOfOverlap, SingularJacobian

FD_STEP = 1e-6
#: Coordinate range used when sampling along an unbounded axis.
UNBOUNDED_SAMPLE_RADIUS = 2.0


@dataclass(frozen=True)
class Chart:
    """An open coordinate box, possibly with periodic axes.

    Periodic axes use the half-open interval ``[lower, upper)`` and wrap;
    the other axes are open intervals. ``region`` is an optional extra
    predicate on (wrapped) coordinates.
    """

    id: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    label: str = ""
    periodic: tuple[int, ...] = ()
    region: Callable[[np.ndarray], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or len(self.lower) < 1:
            raise ValueError(f"chart {self.id!r}: bounds must have equal length >= 1")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"chart {self.id!r}: empty axis ({lo}, {hi})")
        for ax in self.periodic:
            if not np.isfinite(self.lower[ax]) or not np.isfinite(self.upper[ax]):
                raise ValueError(f"chart {self.id!r}: periodic axis {ax} needs finite bounds")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def wrap(self, coords) -> np.ndarray:
        x = np.array(coords, dtype=float)
        for ax in self.periodic:
            lo, hi = self.lower[ax], self.upper[ax]
            x[ax] = lo + np.mod(x[ax] - lo, hi - lo)
        return x

    def delta(self, a, b) -> np.ndarray:
        """``a - b`` with periodic axes reduced to the symmetric interval."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        for ax in self.periodic:
            period = self.upper[ax] - self.lower[ax]
            d[..., ax] = (d[..., ax] + period / 2) % period - period / 2
        return d

    def contains(self, coords) -> bool:
        x = self.wrap(coords)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        for ax in range(self.dim):
            if ax in self.periodic:
                continue
            if not self.lower[ax] < x[ax] < self.upper[ax]:
                return False
        return self.region is None or bool(self.region(x))

    def margin(self, coords) -> float:
        """Normalized distance to the box boundary: 1 at the center, 0 on the boundary."""
        x = self.wrap(coords)
        m = 1.0
        for ax in range(self.dim):
            lo, hi = self.lower[ax], self.upper[ax]
            if ax in self.periodic or not (np.isfinite(lo) and np.isfinite(hi)):
                continue
            half = (hi - lo) / 2
            m = min(m, min(x[ax] - lo, hi - x[ax]) / half)
        return float(m)

    def sample_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([v if np.isfinite(v) else -UNBOUNDED_SAMPLE_RADIUS for v in self.lower])
        hi = np.array([v if np.isfinite(v) else UNBOUNDED_SAMPLE_RADIUS for v in self.upper])
        return lo, hi

    def sample(self, rng: np.random.Generator, count: int, max_draws: int | None = None) -> np.ndarray:
        """Uniform rejection samples from the domain (fewer if the region is thin)."""
        lo, hi = self.sample_box()
        max_draws = max_draws or 50 * count
        out = []
        drawn = 0
        while len(out) < count and drawn < max_draws:
            batch = rng.uniform(lo, hi, size=(count, self.dim))
            drawn += count
            out.extend(x for x in batch if self.contains(x))
        return np.array(out[:count]).reshape(-1, self.dim)

    def describe(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "dim": self.dim,
            "lower": [_json_float(v) for v in self.lower],
            "upper": [_json_float(v) for v in self.upper],
            "periodic": list(self.periodic),
            "restricted": self.region is not None,
        }


def _json_float(v: float):
    if np.isfinite(v):
        return float(v)
    return "inf" if v > 0 else "-inf"


@dataclass(frozen=True)
class PointRef:
    chart: str
    coords: tuple[float, ...]

    @classmethod
    def of(cls, chart: str, coords) -> "PointRef":
        return cls(chart, tuple(float(c) for c in coords))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)


@dataclass(frozen=True)
class TransitionMap:
    source: str
    target: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    inverse_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    kind: str = "transition"

    def inverted(self) -> "TransitionMap":
        inv_jac = self.inverse_jacobian
        if inv_jac is None and self.jacobian is not None:
            fwd_jac, fwd_inv = self.jacobian, self.inverse

            def inv_jac(y, _j=fwd_jac, _i=fwd_inv):
                return np.linalg.inv(_j(_i(y)))

        return TransitionMap(
            source=self.target,
            target=self.source,
            forward=self.inverse,
            inverse=self.forward,
            jacobian=inv_jac,
            inverse_jacobian=self.jacobian,
            name=(self.name + "^-1") if self.name else "",
            kind=self.kind,
        )


class Atlas:
    """Charts plus transitions; the transition graph is closed under inversion."""

    def __init__(
        self,
        charts: Iterable[Chart],
        transitions: Iterable[TransitionMap] = (),
        samples: Mapping[tuple[str, str], Sequence[Sequence[float]]] | None = None,
        name: str = "",
    ):
        self.name = name
        self._charts: dict[str, Chart] = {}
        for c in charts:
            if c.id in self._charts:
                raise ValueError(f"duplicate chart id {c.id!r}")
            self._charts[c.id] = c
        self._transitions: dict[tuple[str, str], TransitionMap] = {}
        for t in transitions:
            for tm in (t, t.inverted()):
                if tm.source not in self._charts or tm.target not in self._charts:
                    raise ValueError(f"transition {tm.source}->{tm.target} references an unknown chart")
                self._transitions.setdefault((tm.source, tm.target), tm)
        self._samples = {k: np.asarray(v, dtype=float) for k, v in (samples or {}).items()}

    @property
    def charts(self) -> dict[str, Chart]:
        return dict(self._charts)

    @property
    def transitions(self) -> dict[tuple[str, str], TransitionMap]:
        return dict(self._transitions)

    def chart(self, chart_id: str) -> Chart:
        return self._charts[chart_id]

    def transition(self, source: str, target: str) -> TransitionMap:
        try:
            return self._transitions[(source, target)]
        except KeyError:
            raise NoPath(f"no transition {source} -> {target}") from None

    def neighbours(self, chart_id: str) -> list[str]:
        return sorted(t for (s, t) in self._transitions if s == chart_id)

    def explicit_samples(self, source: str, target: str) -> np.ndarray | None:
        return self._samples.get((source, target))

    def extended(self, charts: Iterable[Chart] = (), transitions: Iterable[TransitionMap] = (), name: str | None = None) -> "Atlas":
        base = [tm for (s, t), tm in sorted(self._transitions.items()) if s < t]
        return Atlas(
            list(self._charts.values()) + list(charts),
            base + list(transitions),
            samples={k: v for k, v in self._samples.items()},
            name=self.name if name is None else name,
        )

    def map_if_overlap(self, tm: TransitionMap, coords) -> np.ndarray | None:
        """Image of ``coords`` under ``tm`` when the point lies in the overlap, else None."""
        src, tgt = self._charts[tm.source], self._charts[tm.target]
        x = src.wrap(coords)
        if not src.contains(x):
            return None
        with np.errstate(all="ignore"):
            y = np.asarray(tm.forward(x), dtype=float)
        if not tgt.contains(y):
            return None
        return tgt.wrap(y)

    def connected(self, source: str, target: str) -> bool:
        seen = {source}
        queue = deque([source])
        while queue:
            c = queue.popleft()
            if c == target:
                return True
            for nb in self.neighbours(c):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        return False

    def reachable(self, p: PointRef, max_hops: int = 2) -> dict[str, tuple[np.ndarray, tuple[str, ...]]]:
        """Charts reachable from ``p`` within ``max_hops`` valid transitions, with the chart path taken."""
        start = self._charts[p.chart].wrap(p.coords)
        found = {p.chart: (start, (p.chart,))}
        frontier = [p.chart]
        for _ in range(max_hops):
            nxt = []
            for cid in frontier:
                x, path = found[cid]
                for nb in self.neighbours(cid):
                    if nb in found:
                        continue
                    y = self.map_if_overlap(self._transitions[(cid, nb)], x)
                    if y is not None:
                        found[nb] = (y, path + (nb,))
                        nxt.append(nb)
            frontier = nxt
        return found

    def charts_containing(self, p: PointRef, max_hops: int = 2) -> dict[str, np.ndarray]:
        """All charts reachable from ``p`` within ``max_hops`` valid transitions."""
        return {cid: x for cid, (x, _) in self.reachable(p, max_hops).items()}

    def describe(self) -> dict:
        return {
            "name": self.name,
            "charts": [self._charts[k].describe() for k in sorted(self._charts)],
            "transitions": [
                {"source": s, "target": t, "name": tm.name, "kind": tm.kind, "analytic_jacobian": tm.jacobian is not None}
                for (s, t), tm in sorted(self._transitions.items())
            ],
        }


def chart_to(atlas: Atlas, p: PointRef, target: str) -> PointRef:
    """Express ``p`` in chart ``target``, following any chain of valid transitions."""
    src = atlas.chart(p.chart)
    if not src.contains(p.coords):
        raise OutOfDomain(f"{p.coords} is not in chart {p.chart}")
    if target not in atlas.charts:
        raise NoPath(f"unknown chart {target!r}")
    if p.chart == target:
        return PointRef.of(target, src.wrap(p.coords))
    if not atlas.connected(p.chart, target):
        raise NoPath(f"charts {p.chart} and {target} are not connected")
    seen = {p.chart}
    queue = deque([(p.chart, src.wrap(p.coords))])
    while queue:
        cid, x = queue.popleft()
        for nb in atlas.neighbours(cid):
            if nb in seen:
                continue
            y = atlas.map_if_overlap(atlas.transition(cid, nb), x)
            if y is None:
                continue
            if nb == target:
                return PointRef.of(target, y)
            seen.add(nb)
            queue.append((nb, y))
    raise OutOfOverlap(f"{p.coords} in {p.chart} has no image in {target}")


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x, step: float = FD_STEP, delta=None) -> np.ndarray:
    """Central finite-difference Jacobian; ``delta`` overrides output subtraction (for angles)."""
    x = np.asarray(x, dtype=float)
    delta = delta or (lambda a, b: np.asarray(a) - np.asarray(b))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        cols.append(delta(f(x + e), f(x - e)) / (2 * step))
    return np.array(cols).T


def transition_jacobian(atlas: Atlas, source: str, target: str, coords) -> np.ndarray:
    tm = atlas.transition(source, target)
    x = atlas.chart(source).wrap(coords)
    if atlas.map_if_overlap(tm, x) is None:
        raise OutOfOverlap(f"{tuple(x)} is not in the overlap {source} -> {target}")
    if tm.jacobian is not None:
        jac = np.asarray(tm.jacobian(x), dtype=float)
    else:
        jac = fd_jacobian(tm.forward, x, delta=atlas.chart(target).delta)
    if abs(np.linalg.det(jac)) < 1e-12:
        raise SingularJacobian(f"transition {source} -> {target} is singular at {tuple(x)}")
    return jac


@dataclass
class AtlasReport:
    transitions: list[dict]
    cocycles: list[dict]
    tol: float
    jacobian_tol: float

    @property
    def max_inverse_error(self) -> float:
        return max((t["inverse_error"] for t in self.transitions), default=0.0)

    @property
    def max_jacobian_error(self) -> float:
        return max((t["jacobian_error"] for t in self.transitions), default=0.0)

    @property
    def max_cocycle_error(self) -> float:
        return max((c["error"] for c in self.cocycles), default=0.0)

    @property
    def passed(self) -> bool:
        return (
            all(t["n_samples"] > 0 for t in self.transitions)
            and self.max_inverse_error <= self.tol
            and self.max_cocycle_error <= self.tol
            and self.max_jacobian_error <= self.jacobian_tol
        )

    def failures(self) -> list[str]:
        out = []
        for t in self.transitions:
            where = f"{t['source']}->{t['target']}"
            if t["n_samples"] == 0:
                out.append(f"{where}: no overlap samples")
            if t["inverse_error"] > self.tol:
                out.append(f"{where}: inverse error {t['inverse_error']:.3e}")
            if t["jacobian_error"] > self.jacobian_tol:
                out.append(f"{where}: jacobian error {t['jacobian_error']:.3e}")
        for c in self.cocycles:
            if c["error"] > self.tol:
                out.append(f"{c['a']}->{c['b']}->{c['c']}: cocycle error {c['error']:.3e}")
        return out

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "jacobian_tol": self.jacobian_tol,
            "max_inverse_error": self.max_inverse_error,
            "max_jacobian_error": self.max_jacobian_error,
            "max_cocycle_error": self.max_cocycle_error,
            "transitions": self.transitions,
            "cocycles": self.cocycles,
        }


def _stable_seed(seed: int, *names: str) -> int:
    return (seed * 1_000_003 + zlib.crc32("|".join(names).encode())) % (2**32)


def overlap_samples(atlas: Atlas, source: str, target: str, count: int = 256, seed: int = 42) -> np.ndarray:
    """Deterministic samples of the overlap, drawn from both chart boxes."""
    explicit = atlas.explicit_samples(source, target)
    if explicit is not None:
        return explicit
    tm = atlas.transition(source, target)
    src, tgt = atlas.chart(source), atlas.chart(target)
    rng = np.random.default_rng(_stable_seed(seed, source, target))
    found: list[np.ndarray] = []
    for _ in range(40):
        cand = list(src.sample(rng, count))
        with np.errstate(all="ignore"):
            cand += [np.asarray(tm.inverse(y), dtype=float) for y in tgt.sample(rng, count)]
        for x in cand:
            if atlas.map_if_overlap(tm, x) is not None:
                found.append(src.wrap(x))
        if len(found) >= count:
            break
    return np.array(found[:count]).reshape(-1, src.dim)


def validate_atlas(atlas: Atlas, samples: int = 256, seed: int = 42, tol: float = 1e-8, jacobian_tol: float = 1e-5) -> AtlasReport:
    trans_rows = []
    pools: dict[tuple[str, str], np.ndarray] = {}
    for (s, t), tm in sorted(atlas.transitions.items()):
        xs = overlap_samples(atlas, s, t, samples, seed)
        pools[(s, t)] = xs
        src, tgt = atlas.chart(s), atlas.chart(t)
        inv_err = 0.0
        jac_err = 0.0
        for x in xs:
            y = tgt.wrap(tm.forward(x))
            back = tm.inverse(y)
            inv_err = max(inv_err, float(np.max(np.abs(src.delta(back, x)))))
            if tm.jacobian is not None:
                fd = fd_jacobian(tm.forward, x, delta=tgt.delta)
                jac_err = max(jac_err, float(np.max(np.abs(np.asarray(tm.jacobian(x)) - fd))))
        trans_rows.append(
            {"source": s, "target": t, "name": tm.name, "n_samples": int(len(xs)), "inverse_error": inv_err, "jacobian_error": jac_err}
        )

    cocycle_rows = []
    ids = sorted(atlas.charts)
    trans = atlas.transitions
    for a, b, c in itertools.permutations(ids, 3):
        if (a, b) not in trans or (b, c) not in trans or (a, c) not in trans:
            continue
        err = 0.0
        n = 0
        pool = np.concatenate([pools[(a, b)], pools[(a, c)]])
        for x in pool:
            y = atlas.map_if_overlap(trans[(a, b)], x)
            if y is None:
                continue
            z1 = atlas.map_if_overlap(trans[(b, c)], y)
            z2 = atlas.map_if_overlap(trans[(a, c)], x)
            if z1 is None or z2 is None:
                continue
            n += 1
            err = max(err, float(np.max(np.abs(atlas.chart(c).delta(z1, z2)))))
        cocycle_rows.append({"a": a, "b": b, "c": c, "n_samples": n, "error": err})
    return AtlasReport(trans_rows, cocycle_rows, tol, jacobian_tol)
