"""Integrable system near a level with one focus-focus point and one hyperbolic circle.

Built from T*S^2 with the fields X = d/dtheta and Y = h(phi) d/dphi, where
the latitude profile h vanishes at the poles and at phi = +-pi/4.  The two
pole cotangent charts are glued by the focus-focus map and the cotangent
bands over phi = -pi/4 and phi = +pi/4 by the band map.

Chart layout of the glued germ (all cotangent, coordinates base-then-fiber):

========  ===========================  ======================================
id        coordinates                  base region
========  ===========================  ======================================
T*U1      (x1, x2, y1, y2)             |x_i| < sin(eps)/sqrt2, south pole
T*U2      (x1, x2, y1, y2)             same box, north pole
T*PS      (theta, phi, Theta, Phi)     -pi/2 + eps/2 < phi < -pi/4 - eps/2
T*PM      (theta, phi, Theta, Phi)     -pi/4 + eps/2 < phi <  pi/4 - eps/2
T*PN      (theta, phi, Theta, Phi)      pi/4 + eps/2 < phi <  pi/2 - eps/2
T*V1      (theta, u, Theta, Phi)       u = phi + pi/4, |u| < eps
T*V2      (theta, u, Theta, Phi)       u = phi - pi/4, |u| < eps
========  ===========================  ======================================

The polar charts keep a small fiber radius so that no point of the glued
germ has two inconsistent polar representatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cotangent_model import (
    FOCUS_BLOCK,
    GluingMap,
    MomentumSystem,
    check_representatives,
    glue,
    momentum_function,
    verify_commutation,
)
from .errors import EpsilonOutOfRange
from .geometry import Atlas, Chart, PointRef, TransitionMap, chart_to
from .normal_forms import LeafType, WilliamsonType, classify_fixed_point, leaf_type_valid
from .profiles import PiecewiseProfile, Segment, linear
from .symplectic import VectorField, linear_vector_field

PI = math.pi
EPS_MAX = PI / 8


def _check_eps(eps: float):
    if not (0 < eps < EPS_MAX):
        raise EpsilonOutOfRange(f"epsilon must satisfy 0 < eps < pi/8, got {eps}")


def _south_cap():
    # -cos/sin written as tan(phi + pi/2) so the pole value is exactly zero
    return (
        lambda x: math.tan(x + PI / 2),
        lambda x: 1 + math.tan(x + PI / 2) ** 2,
        lambda x: 2 * math.tan(x + PI / 2) * (1 + math.tan(x + PI / 2) ** 2),
    )


def _north_cap():
    # cos/sin = tan(pi/2 - phi)
    return (
        lambda x: math.tan(PI / 2 - x),
        lambda x: -(1 + math.tan(PI / 2 - x) ** 2),
        lambda x: 2 * math.tan(PI / 2 - x) * (1 + math.tan(PI / 2 - x) ** 2),
    )


@dataclass(frozen=True)
class LatitudeProfile:
    eps: float
    profile: PiecewiseProfile

    def __call__(self, phi: float) -> float:
        return self.profile(phi)

    def d1(self, phi: float) -> float:
        return self.profile.d1(phi)

    def d2(self, phi: float) -> float:
        return self.profile.d2(phi)

    @property
    def zeros(self) -> tuple[float, ...]:
        return (-PI / 2, -PI / 4, PI / 4, PI / 2)

    def seams(self) -> list[float]:
        return [s.lo for s in self.profile.segments[1:]]

    def table(self, step: float = 1e-3) -> list[tuple[float, float, float]]:
        n = int(round(PI / step))
        return [(phi, self(phi), self.d1(phi)) for phi in np.linspace(-PI / 2, PI / 2, n + 1)]


def build_profile(eps: float) -> LatitudeProfile:
    """Latitude profile h: exact prescribed expressions near its four zeros, blended elsewhere."""
    _check_eps(eps)
    south, north = _south_cap(), _north_cap()
    v1 = linear(-1.0, -PI / 4)  # -(phi + pi/4)
    v2 = linear(1.0, -PI / 4)  # phi - pi/4
    segs = [
        Segment(-PI / 2, -PI / 2 + eps, south),
        Segment(-PI / 2 + eps, -PI / 4 - eps, south, v1),
        Segment(-PI / 4 - eps, -PI / 4 + eps, v1),
        Segment(-PI / 4 + eps, PI / 4 - eps, v1, v2),
        Segment(PI / 4 - eps, PI / 4 + eps, v2),
        Segment(PI / 4 + eps, PI / 2 - eps, v2, north),
        Segment(PI / 2 - eps, PI / 2, north),
    ]
    return LatitudeProfile(eps, PiecewiseProfile(segs))


def profile_check(h: LatitudeProfile, step: float = 1e-3, gap: float = 1e-2, floor: float = 1e-6) -> dict:
    """Zeros, non-vanishing away from them, sign pattern and C^2 matching at the seams."""
    zero_values = [abs(h(z)) for z in h.zeros]
    n = int(round(PI / step))
    grid = np.linspace(-PI / 2, PI / 2, n + 1)
    far = [x for x in grid if min(abs(x - z) for z in h.zeros) >= gap]
    min_abs = min(abs(h(x)) for x in far)
    signs = [int(np.sign(h(m))) for m in (-3 * PI / 8, 0.0, 3 * PI / 8)]
    jumps = []
    segs = h.profile.segments
    for a, b in zip(segs, segs[1:]):
        x = b.lo
        jumps.append(max(abs(a.eval(x, k) - b.eval(x, k)) for k in range(3)))
    out = {
        "zeros": list(h.zeros),
        "max_abs_at_zeros": max(zero_values),
        "min_abs_away_from_zeros": float(min_abs),
        "grid_step": step,
        "zero_gap": gap,
        "floor": floor,
        "sign_pattern": signs,
        "max_seam_jump_c2": float(max(jumps)),
    }
    out["passed"] = bool(
        out["max_abs_at_zeros"] == 0.0 and min_abs >= floor and signs == [1, -1, 1] and out["max_seam_jump_c2"] <= 1e-9
    )
    return out


# polar <-> cartesian on the first two coordinates of the unit sphere


def _chi(q):
    th, ph = q
    return np.array([math.cos(ph) * math.cos(th), math.cos(ph) * math.sin(th)])


def _dchi(q):
    th, ph = q
    c, s = math.cos(ph), math.sin(ph)
    ct, st = math.cos(th), math.sin(th)
    return np.array([[-c * st, -s * ct], [c * ct, -s * st]])


def _d2chi(q):
    """[i, j, k] = d^2 chi^i / dq_j dq_k."""
    th, ph = q
    c, s = math.cos(ph), math.sin(ph)
    ct, st = math.cos(th), math.sin(th)
    return np.array(
        [
            [[-c * ct, s * st], [s * st, -c * ct]],
            [[-c * st, -s * ct], [-s * ct, -c * st]],
        ]
    )


def _chi_inv(sign: float):
    def inv(x):
        r = math.hypot(x[0], x[1])
        return np.array([math.atan2(x[1], x[0]), math.atan2(sign * math.sqrt(max(0.0, 1 - r * r)), r)])

    return inv


def polar_cartesian_lift(source: str, target: str, sign: float) -> TransitionMap:
    """Cotangent lift of (theta, phi) -> cos(phi)(cos theta, sin theta); ``sign`` picks the hemisphere."""
    chi_inv = _chi_inv(sign)

    def forward(z):
        q, p = z[:2], z[2:]
        D = _dchi(q)
        return np.concatenate([_chi(q), np.linalg.solve(D.T, p)])

    def inverse(w):
        x, y = w[:2], w[2:]
        q = chi_inv(x)
        return np.concatenate([q, _dchi(q).T @ y])

    def jacobian(z):
        q, p = z[:2], z[2:]
        D = _dchi(q)
        Dinv_T = np.linalg.inv(D).T
        P = Dinv_T @ p
        d2 = _d2chi(q)
        J = np.zeros((4, 4))
        J[:2, :2] = D
        J[2:, 2:] = Dinv_T
        for k in range(2):
            J[2:, k] = -Dinv_T @ d2[:, :, k].T @ P
        return J

    def inverse_jacobian(w):
        x, y = w[:2], w[2:]
        q = chi_inv(x)
        D = _dchi(q)
        Dinv = np.linalg.inv(D)
        d2 = _d2chi(q)
        J = np.zeros((4, 4))
        J[:2, :2] = Dinv
        J[2:, 2:] = D.T
        # p = D(q)^T y with q = chi^{-1}(x)
        dp_dq = np.stack([d2[:, :, k].T @ y for k in range(2)], axis=1)
        J[2:, :2] = dp_dq @ Dinv
        return J

    return TransitionMap(source, target, forward, inverse, jacobian, inverse_jacobian, name="polar->cartesian lift")


def _phi_shift(source: str, target: str, shift: float) -> TransitionMap:
    e = np.array([0.0, shift, 0.0, 0.0])
    eye = np.eye(4)
    return TransitionMap(source, target, lambda z: z + e, lambda z: z - e, lambda z: eye, lambda z: eye, name=f"phi {shift:+.6g}")


def _latitude_field(h: LatitudeProfile, chart: str, shift: float) -> VectorField:
    """(0, h(q2 + shift)) in (theta, phi)-type coordinates."""

    def second(q):
        t = np.zeros((2, 2, 2))
        t[1, 1, 1] = h.d2(q[1] + shift)
        return t

    return VectorField(
        chart,
        2,
        lambda q: np.array([0.0, h(q[1] + shift)]),
        lambda q: np.array([[0.0, 0.0], [0.0, h.d1(q[1] + shift)]]),
        second,
        "h(phi) d/dphi",
    )


def sphere_charts(eps: float) -> list[Chart]:
    a = math.sin(eps) / math.sqrt(2)
    rho = math.sin(eps / 2) ** 2 / 4
    per = (0,)
    box = lambda lo, hi, r_th, r_ph: ((-PI, lo, -r_th, -r_ph), (PI, hi, r_th, r_ph))
    out = [
        Chart("T*U1", (-a,) * 4, (a,) * 4, label="south pole, cartesian"),
        Chart("T*U2", (-a,) * 4, (a,) * 4, label="north pole, cartesian"),
    ]
    for cid, lo, hi, lab in [
        ("T*PS", -PI / 2 + eps / 2, -PI / 4 - eps / 2, "southern band"),
        ("T*PM", -PI / 4 + eps / 2, PI / 4 - eps / 2, "middle band"),
        ("T*PN", PI / 4 + eps / 2, PI / 2 - eps / 2, "northern band"),
    ]:
        l, u = box(lo, hi, rho, rho)
        out.append(Chart(cid, l, u, label=lab, periodic=per))
    for cid, lab in [("T*V1", "collar of phi=-pi/4"), ("T*V2", "collar of phi=+pi/4")]:
        l, u = box(-eps, eps, eps, eps)
        out.append(Chart(cid, l, u, label=lab, periodic=per))
    return out


def build_sphere_system(eps: float, seed: int = 42) -> MomentumSystem:
    """T*S^2 with f = <d/dtheta, w> and g = <h(phi) d/dphi, w>, before any gluing."""
    h = build_profile(eps)
    charts = sphere_charts(eps)
    transitions = [
        polar_cartesian_lift("T*PS", "T*U1", -1.0),
        polar_cartesian_lift("T*PN", "T*U2", 1.0),
        _phi_shift("T*PS", "T*V1", PI / 4),
        _phi_shift("T*PM", "T*V1", PI / 4),
        _phi_shift("T*PM", "T*V2", -PI / 4),
        _phi_shift("T*PN", "T*V2", -PI / 4),
    ]
    rotation = [[0.0, -1.0], [1.0, 0.0]]
    fields: dict[str, list[VectorField]] = {
        "T*U1": [linear_vector_field(rotation, None, "U1", "-x2 d1 + x1 d2"), linear_vector_field(np.eye(2), None, "U1", "x1 d1 + x2 d2")],
        "T*U2": [linear_vector_field(rotation, None, "U2", "-x2 d1 + x1 d2"), linear_vector_field(-np.eye(2), None, "U2", "-x1 d1 - x2 d2")],
    }
    d_theta = linear_vector_field(np.zeros((2, 2)), [1.0, 0.0], "", "d/dtheta")
    for cid, shift in [("T*PS", 0.0), ("T*PM", 0.0), ("T*PN", 0.0), ("T*V1", -PI / 4), ("T*V2", PI / 4)]:
        fields[cid] = [d_theta, _latitude_field(h, cid[2:], shift)]
    functions = {
        cid: [momentum_function(X, cid, "f"), momentum_function(Y, cid, "g")] for cid, (X, Y) in fields.items()
    }
    system = MomentumSystem(2, Atlas(charts, transitions, name="T*S^2"), functions, fields, name=f"sphere eps={eps:.6g}")
    system.report["representatives_max_error"] = check_representatives(system, tol=1e-9, seed=seed)
    system.report["profile"] = h
    return system


def pole_gluing() -> GluingMap:
    """(x1, x2, y1, y2) -> (-y1, -y2, x1, x2) from T*U1 to T*U2."""
    return GluingMap.of("T*U1", "T*U2", FOCUS_BLOCK, "pole")


def band_gluing() -> GluingMap:
    """(theta, u, Theta, Phi) -> (theta, Phi, Theta, -u) from T*V1 to T*V2."""
    return GluingMap.of("T*V1", "T*V2", ((1, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 0), (0, -1, 0, 0)), "band")


def build_glued_sphere_system(eps: float, seed: int = 42, descent_tol: float = 1e-12, samples: int = 1000) -> MomentumSystem:
    pieces = build_sphere_system(eps, seed)
    glued = glue(pieces, [pole_gluing(), band_gluing()], samples=samples, seed=seed, tol=descent_tol)
    glued.report["representatives_max_error"] = pieces.report["representatives_max_error"]
    glued.report["profile"] = pieces.report["profile"]
    return glued


def _zero_section_grid(chart: Chart, resolution: int) -> np.ndarray:
    lo, hi = chart.sample_box()
    axes = []
    for k in range(2):
        if k in chart.periodic:
            axes.append(np.linspace(lo[k], hi[k], resolution, endpoint=False))
        else:
            # interior points only; odd resolution keeps the centre
            axes.append(np.linspace(lo[k], hi[k], resolution + 2)[1:-1])
    g = np.array(np.meshgrid(*axes, indexing="ij")).reshape(2, -1).T
    return np.hstack([g, np.zeros_like(g)])


@dataclass
class SingularComponent:
    rank: int
    chart: str
    points: list[tuple[float, ...]]
    williamson: WilliamsonType
    leaf: LeafType
    closed_orbit: bool | None

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "chart": self.chart,
            "n_points": len(self.points),
            "representative": list(self.points[0]),
            "williamson_type": list(self.williamson.as_tuple()),
            "leaf_type": list(self.leaf.as_tuple()),
            "leaf_type_valid": leaf_type_valid(self.leaf, 2),
            "closed_orbit": self.closed_orbit,
        }


@dataclass
class ScanReport:
    resolution: int
    rank_counts: dict[str, dict[int, int]]
    components: list[SingularComponent]

    @property
    def focus_points(self) -> list[SingularComponent]:
        return [c for c in self.components if c.rank == 0 and c.williamson.as_tuple() == (0, 0, 1)]

    @property
    def hyperbolic_circles(self) -> list[SingularComponent]:
        return [c for c in self.components if c.rank == 1 and c.williamson.as_tuple() == (0, 1, 0) and c.closed_orbit]

    @property
    def passed(self) -> bool:
        return (
            len(self.components) == 2
            and len(self.focus_points) == 1
            and len(self.hyperbolic_circles) == 1
            and all(leaf_type_valid(c.leaf, 2) for c in self.components)
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "resolution": self.resolution,
            "rank_counts": {c: {str(r): n for r, n in sorted(v.items())} for c, v in sorted(self.rank_counts.items())},
            "n_components": len(self.components),
            "n_focus_focus_points": len(self.focus_points),
            "n_hyperbolic_circles": len(self.hyperbolic_circles),
            "components": [c.to_dict() for c in self.components],
        }


def _rank(D: np.ndarray, tol: float = 1e-8) -> int:
    return int(np.sum(np.linalg.svd(D, compute_uv=False) > tol))


def _orbit_closes(system: MomentumSystem, p: PointRef, step: float = 1e-2) -> bool:
    """f-flow for one period 2pi returns to the start without leaving the rank-1 locus."""
    from .dynamics import integrate_flow

    traj = integrate_flow(system, 0, p, 2 * PI, step)
    for _, q in traj.samples:
        if _rank(system.differentials(q)) != 1:
            return False
    end = chart_to(system.atlas, traj.samples[-1][1], p.chart)
    chart = system.atlas.chart(p.chart)
    return float(np.max(np.abs(chart.delta(end.array, p.array)))) <= 1e-8


def singular_scan(system: MomentumSystem, resolution: int = 41, seed: int = 42) -> ScanReport:
    """Rank of (df, dg) on a zero-section grid of every chart, grouped into singular components."""
    counts: dict[str, dict[int, int]] = {}
    singular: list[tuple[int, str, np.ndarray]] = []
    for cid in sorted(system.functions):
        chart = system.atlas.chart(cid)
        counts[cid] = {}
        for z in _zero_section_grid(chart, resolution):
            if not chart.contains(z):
                continue
            r = _rank(system.differentials(PointRef.of(cid, z)))
            counts[cid][r] = counts[cid].get(r, 0) + 1
            if r < system.n:
                found = system.atlas.charts_containing(PointRef.of(cid, z), max_hops=1)
                canon = min(found)
                singular.append((r, canon, found[canon]))

    # single-linkage clustering inside each canonical chart
    link = 1.5 * 2 * PI / resolution
    parent = list(range(len(singular)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(singular)):
        for j in range(i + 1, len(singular)):
            (ri, ci, zi), (rj, cj, zj) = singular[i], singular[j]
            if ri == rj and ci == cj:
                d = np.max(np.abs(system.atlas.chart(ci).delta(zi, zj)))
                if d <= link:
                    parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(len(singular)):
        groups.setdefault(find(i), []).append(i)

    components = []
    for members in groups.values():
        rank, cid, _ = singular[members[0]]
        pts = sorted({tuple(float(v) for v in singular[k][2]) for k in members})
        z = np.array(pts[0])
        fs = system.functions[cid]
        if rank == 0:
            wt = classify_fixed_point(fs, z, seed=seed)
            leaf = LeafType(wt.k_e, wt.k_h, wt.k_f, 0, 0)
            closed = None
        else:
            D = system.differentials(PointRef.of(cid, z))
            _, _, vt = np.linalg.svd(D.T)
            c = vt[-1]  # combination with vanishing differential
            crit = sum((float(ci) * f for ci, f in zip(c, fs)), start=0.0 * fs[0])
            wt = classify_fixed_point([crit], z, seed=seed)
            closed = _orbit_closes(system, PointRef.of(cid, z))
            ncl = 1 if closed else 0
            leaf = LeafType(wt.k_e, wt.k_h, wt.k_f, ncl, rank - ncl)
        components.append(SingularComponent(rank, cid, pts, wt, leaf, closed))
    components.sort(key=lambda c: (c.rank, c.chart, c.points[0]))
    return ScanReport(resolution, counts, components)


def sphere_commutation(system: MomentumSystem, sample_count: int = 10_000, seed: int = 42, workers: int = 1):
    return verify_commutation(system, sample_count=sample_count, seed=seed, workers=workers)
