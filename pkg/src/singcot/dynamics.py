"""Hamiltonian flows of the momentum functions with chart switching.

The integrator is the implicit midpoint rule (symplectic, second order),
solved by Newton iteration.  A trajectory lives in one chart at a time and
moves to a neighbouring chart when it drifts toward the boundary of the
current one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cotangent_model import MomentumSystem
from .errors import LeftAtlas, NoConvergence, NotRegular, SeedOffLevel
from .geometry import PointRef, chart_to
from .symplectic import ScalarField, poisson_matrix

SWITCH_MARGIN = 0.25


@dataclass
class Trajectory:
    samples: list[tuple[float, PointRef]]
    step: float
    integrator: str = "implicit-midpoint"
    switches: list[tuple[float, str, str]] = field(default_factory=list)
    left_atlas: bool = False

    @property
    def end(self) -> PointRef:
        return self.samples[-1][1]

    def rows(self) -> list[list]:
        return [[t, p.chart, *p.coords] for t, p in self.samples]


def midpoint_step(f: ScalarField, z, h: float, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """One implicit-midpoint step z1 = z + h J grad f((z + z1)/2).

    Newton iteration from the explicit Euler predictor; at least one Newton
    update is always taken, so small states are not accepted on the strength
    of an absolute residual alone.
    """
    z = np.asarray(z, dtype=float)
    J = poisson_matrix(z.size // 2)
    eye = np.eye(z.size)
    z1 = z + h * (J @ f.grad(z))
    scale = max(1.0, float(np.max(np.abs(z))))
    for _ in range(max_iter):
        m = 0.5 * (z + z1)
        F = z1 - z - h * (J @ f.grad(m))
        A = eye - 0.5 * h * (J @ f.hess(m))
        dz = np.linalg.solve(A, F)
        z1 = z1 - dz
        if np.max(np.abs(dz)) <= tol * scale:
            return z1
    m = 0.5 * (z + z1)
    F = z1 - z - h * (J @ f.grad(m))
    raise NoConvergence(f"implicit midpoint did not converge at {tuple(z)} (residual {np.max(np.abs(F)):.3e})")


def _ranked(atlas, p: PointRef, max_hops: int = 2) -> list[tuple[str, np.ndarray, tuple[str, ...]]]:
    """Charts covering ``p``, deepest margin first, ties broken by chart id."""
    found = atlas.reachable(p, max_hops)
    order = sorted(found, key=lambda c: (-atlas.chart(c).margin(found[c][0]), c))
    return [(c, *found[c]) for c in order]


def _hops(t: float, path: tuple[str, ...]) -> list[tuple[float, str, str]]:
    return [(t, a, b) for a, b in zip(path, path[1:])]


def integrate_flow(
    system: MomentumSystem,
    i: int,
    start: PointRef,
    t_end: float,
    step: float,
    switch_margin: float = SWITCH_MARGIN,
    stop_on_exit: bool = False,
) -> Trajectory:
    """Flow of H_{g_i} from ``start`` for time ``t_end`` (negative runs backward).

    When the state gets within ``switch_margin`` of its chart boundary it
    moves to the covering chart (reachable by at most two transitions) with
    the deepest margin.  Every hop is logged as a switch event.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    atlas = system.atlas
    chart = atlas.chart(start.chart)
    if not chart.contains(start.coords):
        raise LeftAtlas(f"start {start.coords} is not in chart {start.chart}")
    nsteps = max(1, int(round(abs(t_end) / step))) if t_end != 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    p = PointRef.of(start.chart, chart.wrap(start.coords))
    traj = Trajectory([(0.0, p)], step)
    for k in range(nsteps):
        t = (k + 1) * h
        cur = atlas.chart(p.chart)
        if cur.margin(p.coords) < switch_margin:
            cid, z, path = _ranked(atlas, p)[0]
            if cid != p.chart and atlas.chart(cid).margin(z) > cur.margin(p.coords):
                traj.switches.extend(_hops(k * h, path))
                p = PointRef.of(cid, z)
                cur = atlas.chart(cid)
        z1 = midpoint_step(system.functions[p.chart][i], p.array, h)
        if not cur.contains(z1):
            moved = False
            for cid, z, path in _ranked(atlas, p):
                if cid == p.chart:
                    continue
                w1 = midpoint_step(system.functions[cid][i], z, h)
                if atlas.chart(cid).contains(w1):
                    traj.switches.extend(_hops(k * h, path))
                    cur, z1, moved = atlas.chart(cid), w1, True
                    break
            if not moved:
                if stop_on_exit:
                    traj.left_atlas = True
                    return traj
                raise LeftAtlas(f"flow of g{i + 1} leaves the atlas near {p.chart}:{p.coords} at t={t:.6g}")
        p = PointRef.of(cur.id, cur.wrap(z1))
        traj.samples.append((t, p))
    return traj


@dataclass
class ConservationReport:
    drifts: list[float]
    flowed: int | None = None

    @property
    def energy_drift(self) -> float | None:
        return None if self.flowed is None else self.drifts[self.flowed]

    def to_dict(self) -> dict:
        return {"drifts": self.drifts, "flowed_index": self.flowed, "energy_drift": self.energy_drift}


def conservation_report(system: MomentumSystem, trajectory: Trajectory, flowed: int | None = None) -> ConservationReport:
    if not trajectory.samples:
        raise ValueError("empty trajectory")
    v0 = system.values(trajectory.samples[0][1])
    drift = np.zeros(system.n)
    for _, p in trajectory.samples[1:]:
        drift = np.maximum(drift, np.abs(system.values(p) - v0))
    return ConservationReport([float(d) for d in drift], flowed)


def is_regular(system: MomentumSystem, p: PointRef, tol: float = 1e-8) -> bool:
    s = np.linalg.svd(system.differentials(p), compute_uv=False)
    return bool(np.sum(s > tol) == system.n)


def commuting_flows_check(
    system: MomentumSystem, start: PointRef, i: int, j: int, s: float, t: float, tol: float = 1e-6, step: float = 1e-3
) -> dict:
    """Distance between phi_i^s(phi_j^t(x)) and phi_j^t(phi_i^s(x)) in a common chart."""
    if not is_regular(system, start):
        raise NotRegular(f"{start} is not a regular point of the momentum map")
    a = integrate_flow(system, i, integrate_flow(system, j, start, t, step).end, s, step).end
    b = integrate_flow(system, j, integrate_flow(system, i, start, s, step).end, t, step).end
    b_in_a = chart_to(system.atlas, b, a.chart)
    d = float(np.max(np.abs(system.atlas.chart(a.chart).delta(a.array, b_in_a.array))))
    return {"i": i, "j": j, "s": s, "t": t, "step": step, "distance": d, "tol": tol, "passed": d <= tol, "chart": a.chart}


def project_to_level(system: MomentumSystem, p: PointRef, values, iters: int = 20, tol: float = 1e-10) -> PointRef:
    """Minimum-norm Newton projection onto {g = values} inside p's chart."""
    target = np.asarray(values, dtype=float)
    z = p.array.copy()
    for _ in range(iters):
        r = system.values(PointRef.of(p.chart, z)) - target
        if np.max(np.abs(r)) <= tol:
            break
        z = z - np.linalg.pinv(system.differentials(PointRef.of(p.chart, z))) @ r
    return PointRef.of(p.chart, z)


@dataclass
class LevelSample:
    points: list[PointRef]
    boundary_hit: bool
    n_boundary_hits: int
    steps_used: int
    level_residual: float

    @property
    def diameter(self) -> float:
        """Largest coordinate extent (non-periodic axes) among points sharing a chart."""
        by_chart: dict[str, list[np.ndarray]] = {}
        for p in self.points:
            by_chart.setdefault(p.chart, []).append(p.array)
        return max((float(np.max(np.ptp(np.array(v), axis=0))) for v in by_chart.values()), default=0.0)

    def to_dict(self) -> dict:
        charts: dict[str, int] = {}
        for p in self.points:
            charts[p.chart] = charts.get(p.chart, 0) + 1
        return {
            "n_points": len(self.points),
            "boundary_hit": self.boundary_hit,
            "n_boundary_hits": self.n_boundary_hits,
            "steps_used": self.steps_used,
            "level_residual": self.level_residual,
            "points_per_chart": dict(sorted(charts.items())),
        }


def sample_level(
    system: MomentumSystem,
    values,
    seeds: list[PointRef],
    budget: int = 10_000,
    step: float = 1e-2,
    segment: int = 200,
    seed: int = 42,
) -> LevelSample:
    """Explore the level through seeded random flows of the g_i, both time directions."""
    projected = []
    for s in seeds:
        q = project_to_level(system, s, values)
        res = float(np.max(np.abs(system.values(q) - np.asarray(values, dtype=float))))
        if res > 1e-6 or not system.atlas.chart(q.chart).contains(q.coords):
            raise SeedOffLevel(f"seed {s} is not on the level {tuple(values)} (residual {res:.3e})")
        projected.append(q)
    rng = np.random.default_rng(seed)
    cloud = list(projected)
    used = 0
    hits = 0
    while used < budget:
        p = cloud[rng.integers(len(cloud))]
        i = int(rng.integers(system.n))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        nsteps = min(segment, budget - used)
        traj = integrate_flow(system, i, p, sign * nsteps * step, step, stop_on_exit=True)
        used += nsteps
        hits += int(traj.left_atlas)
        cloud.extend(q for _, q in traj.samples[1:])
    vals = np.asarray(values, dtype=float)
    resid = max(float(np.max(np.abs(system.values(q) - vals))) for q in cloud)
    return LevelSample(cloud, hits > 0, hits, used, resid)
