"""Momentum functions on cotangent charts, gluing maps and the glued germ.

For every branch of the desingularized level we take the cotangent chart
``(c, w)`` (base coordinates c, fiber w) and the momentum functions
``g_i(c, w) = <X_i(c), w>`` of the lifted Hamiltonian fields.  Branches
through the same singular point are identified by linear
symplectomorphisms under which every ``g_i`` is invariant.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import MomentumMismatch, NonSymplecticMap
from .geometry import Atlas, Chart, PointRef, TransitionMap, validate_atlas
from .normal_forms import (
    BranchChart,
    Kind,
    LocalModel,
    branch_chart,
    enumerate_branches,
    label_str,
    model_functions,
)
from .profiles import PiecewiseProfile, Segment, linear
from .symplectic import (
    ScalarField,
    VectorField,
    exact_symplectic_residual,
    hamiltonian_vector_field,
    linear_vector_field,
    poisson_bracket,
)


def momentum_function(X: VectorField, chart: str | None = None, name: str = "") -> ScalarField:
    """g(q, p) = sum_k p_k X^k(q) on the cotangent chart over X's chart."""
    n = X.dim
    chart = chart or f"T*{X.chart}"

    def value(z):
        return float(z[n:] @ X(z[:n]))

    def gradient(z):
        q, p = z[:n], z[n:]
        return np.concatenate([X.jac(q).T @ p, X(q)])

    hessian = None
    if X.second is not None:

        def hessian(z):
            q, p = z[:n], z[n:]
            D = X.jac(q)
            H = np.zeros((2 * n, 2 * n))
            H[:n, :n] = np.einsum("i,ijk->jk", p, np.asarray(X.second(q)))
            H[:n, n:] = D.T
            H[n:, :n] = D
            return H

    return ScalarField(chart, value, gradient, hessian, name or f"<{X.name},p>")


@dataclass(frozen=True)
class LiftedField:
    index: int
    branch: BranchChart
    field: VectorField


def _factor_generators(kind: Kind, choice: str, s: int, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """(A, b) for the linear fields X_i = A c + b contributed by one factor."""
    def zero():
        return np.zeros((n, n)), np.zeros(n)

    if kind is Kind.REGULAR:
        A, b = zero()
        b[s] = 1.0
        return [(A, b)]
    if kind is Kind.HYPERBOLIC:
        A, b = zero()
        A[s, s] = 1.0 if choice == "X" else -1.0
        return [(A, b)]
    a, c = s, s + 1
    A1, b1 = zero()
    sign = 1.0 if choice == "X" else -1.0
    A1[a, a] = A1[c, c] = sign
    A2, b2 = zero()
    A2[a, c] = -1.0
    A2[c, a] = 1.0
    return [(A1, b1), (A2, b2)]


def lifted_fields(model: LocalModel, label, check_samples: int = 16, seed: int = 0) -> list[LiftedField]:
    """The Hamiltonian fields of h_1..h_n restricted to a branch, in branch coordinates."""
    bc = branch_chart(model, label)
    n = model.n
    out = []
    i = 0
    for (kind, s), choice in zip(model.slots(), bc.label):
        for A, b in _factor_generators(kind, choice, s, n):
            out.append(LiftedField(i, bc, linear_vector_field(A, b, bc.chart.id, f"X{i + 1}")))
            i += 1
    # pushforward check: H_{h_i}(j(c)) = Dj X_i(c)
    hs = model_functions(model)
    rng = np.random.default_rng(seed)
    Dj = bc.differential
    for c in rng.uniform(-1, 1, size=(check_samples, n)):
        z = bc.immersion(c)
        for lf in out:
            err = np.max(np.abs(hamiltonian_vector_field(hs[lf.index], z) - Dj @ lf.field(c)))
            if err > 1e-10:
                raise AssertionError(f"lifted field {lf.index} disagrees with H_h on branch {label_str(bc.label)}: {err:.3e}")
    return out


def _exact(x) -> Fraction:
    return Fraction(x)


@dataclass(frozen=True)
class GluingMap:
    """Linear identification ``z -> M z`` between two cotangent charts (exact coefficients)."""

    source: str
    target: str
    matrix: tuple[tuple[Fraction, ...], ...]
    name: str = ""

    @classmethod
    def of(cls, source: str, target: str, matrix, name: str = "") -> "GluingMap":
        return cls(source, target, tuple(tuple(_exact(x) for x in row) for row in matrix), name)

    @property
    def array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.matrix])

    @property
    def offset(self) -> np.ndarray:
        return np.zeros(len(self.matrix))

    def __call__(self, z) -> np.ndarray:
        return self.array @ np.asarray(z, dtype=float)

    def symplectic_residual(self) -> Fraction:
        return exact_symplectic_residual(self.matrix)

    def is_exactly_symplectic(self) -> bool:
        return self.symplectic_residual() == 0

    def inverse_matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        d = len(self.matrix)
        aug = [list(row) + [Fraction(int(i == j)) for j in range(d)] for i, row in enumerate(self.matrix)]
        for col in range(d):
            piv = next((r for r in range(col, d) if aug[r][col] != 0), None)
            if piv is None:
                raise NonSymplecticMap(f"gluing {self.name} is singular")
            aug[col], aug[piv] = aug[piv], aug[col]
            pv = aug[col][col]
            aug[col] = [x / pv for x in aug[col]]
            for r in range(d):
                if r != col and aug[r][col] != 0:
                    f = aug[r][col]
                    aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
        return tuple(tuple(row[d:]) for row in aug)

    def to_transition(self) -> TransitionMap:
        M = self.array
        Minv = np.array([[float(x) for x in row] for row in self.inverse_matrix()])
        return TransitionMap(
            self.source,
            self.target,
            lambda z: M @ z,
            lambda z: Minv @ z,
            lambda z: M,
            lambda z: Minv,
            name=self.name,
            kind="gluing",
        )

    def describe(self) -> dict:
        return {
            "name": self.name,
            "source": self.source,
            "target": self.target,
            "matrix": [[str(x) for x in row] for row in self.matrix],
            "exact_symplectic_residual": str(self.symplectic_residual()),
        }


HYPERBOLIC_BLOCK = ((0, -1), (1, 0))
FOCUS_BLOCK = ((0, 0, -1, 0), (0, 0, 0, -1), (1, 0, 0, 0), (0, 1, 0, 0))


def hyperbolic_gluing(source: str = "T*X", target: str = "T*Y") -> GluingMap:
    """(x, y) -> (X, Y) = (-y, x)."""
    return GluingMap.of(source, target, HYPERBOLIC_BLOCK, "hyperbolic")


def focus_gluing(source: str = "T*X", target: str = "T*Y") -> GluingMap:
    """(x1, x2, y1, y2) -> (-y1, -y2, x1, x2)."""
    return GluingMap.of(source, target, FOCUS_BLOCK, "focus-focus")


def _embed_block(block, slots: Sequence[int], n: int, full=None):
    """Place a (2d x 2d) block acting on (q_slots, p_slots) into a 2n x 2n matrix."""
    M = full if full is not None else [[Fraction(int(i == j)) for j in range(2 * n)] for i in range(2 * n)]
    idx = list(slots) + [n + s for s in slots]
    for a, ia in enumerate(idx):
        for b, ib in enumerate(idx):
            M[ia][ib] = Fraction(block[a][b])
    return M


def _invert_block(block):
    return GluingMap.of("", "", block).inverse_matrix()


@dataclass
class MomentumSystem:
    """n momentum functions per chart of a cotangent atlas."""

    n: int
    atlas: Atlas
    functions: dict[str, list[ScalarField]]
    generators: dict[str, list] = field(default_factory=dict)
    gluings: tuple[GluingMap, ...] = ()
    name: str = ""
    report: dict = field(default_factory=dict)

    def function(self, chart: str, i: int) -> ScalarField:
        return self.functions[chart][i]

    def values(self, p: PointRef) -> np.ndarray:
        z = p.array
        return np.array([f(z) for f in self.functions[p.chart]])

    def differentials(self, p: PointRef) -> np.ndarray:
        z = p.array
        return np.array([f.grad(z) for f in self.functions[p.chart]])

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "atlas": self.atlas.describe(),
            "functions": {c: [f.name for f in fs] for c, fs in sorted(self.functions.items())},
            "gluings": [g.describe() for g in self.gluings],
        }


def cotangent_chart_id(model: LocalModel, label) -> str:
    return f"T*[{model}:{label_str(tuple(label))}]"


def build_cotangent_pieces(model: LocalModel, radius: float = 1.0) -> MomentumSystem:
    """Un-glued cotangent charts over every branch, each carrying g_1..g_n."""
    model.require_no_elliptic()
    n = model.n
    charts, functions, generators = [], {}, {}
    for label in enumerate_branches(model):
        lfs = lifted_fields(model, label)
        cid = cotangent_chart_id(model, label)
        charts.append(Chart(cid, (-radius,) * (2 * n), (radius,) * (2 * n), label=f"T* of branch {label_str(label)}"))
        functions[cid] = [momentum_function(lf.field, cid, f"g{lf.index + 1}") for lf in lfs]
        generators[cid] = lfs
    return MomentumSystem(n, Atlas(charts, name=f"T*L^[{model}]"), functions, generators, name=str(model))


def model_gluings(model: LocalModel) -> list[GluingMap]:
    """Product gluing between every pair of branches (factor-wise hyperbolic/focus maps)."""
    n = model.n
    labels = enumerate_branches(model)
    out = []
    for a, b in itertools.combinations(labels, 2):
        M = None
        for (kind, s), ca, cb in zip(model.slots(), a, b):
            if ca == cb:
                continue
            block = HYPERBOLIC_BLOCK if kind is Kind.HYPERBOLIC else FOCUS_BLOCK
            if ca == "Y":
                block = _invert_block(block)
            M = _embed_block(block, range(s, s + kind.half_dim), n, M)
        out.append(GluingMap.of(cotangent_chart_id(model, a), cotangent_chart_id(model, b), M, f"{label_str(a)}->{label_str(b)}"))
    return out


def _sample_gluing_domain(system: MomentumSystem, gmap: GluingMap, count: int, rng) -> np.ndarray:
    src = system.atlas.chart(gmap.source)
    tgt = system.atlas.chart(gmap.target)
    out = []
    for _ in range(50):
        for z in src.sample(rng, count):
            if tgt.contains(gmap(z)):
                out.append(z)
        if len(out) >= count:
            break
    return np.array(out[:count]).reshape(-1, src.dim)


def descent_residuals(system: MomentumSystem, gmap: GluingMap, samples: int = 1000, seed: int = 42) -> tuple[list[float], int]:
    """max |g_i'(Phi z) - g_i(z)| per function over sampled source points."""
    rng = np.random.default_rng(seed)
    zs = _sample_gluing_domain(system, gmap, samples, rng)
    M = gmap.array
    res = [0.0] * system.n
    for z in zs:
        w = M @ z
        for i in range(system.n):
            d = abs(system.functions[gmap.target][i](w) - system.functions[gmap.source][i](z))
            res[i] = max(res[i], d)
    return res, len(zs)


def glue(
    system: MomentumSystem,
    maps: Sequence[GluingMap],
    samples: int = 1000,
    seed: int = 42,
    tol: float = 1e-12,
    validate: bool = True,
    atlas_samples: int = 256,
) -> MomentumSystem:
    """Identify charts along the gluing maps after checking symplecticity and descent."""
    sym_rows, desc_rows = [], []
    for gmap in maps:
        for cid in (gmap.source, gmap.target):
            if cid not in system.functions:
                raise KeyError(f"gluing {gmap.name} references unknown chart {cid}")
        resid = gmap.symplectic_residual()
        sym_rows.append({"gluing": gmap.name, "residual": str(resid)})
        if resid != 0:
            raise NonSymplecticMap(f"gluing {gmap.name}: M^T J M - J has entries up to {resid}")
    for gmap in maps:
        res, count = descent_residuals(system, gmap, samples, seed)
        desc_rows.append({"gluing": gmap.name, "source": gmap.source, "target": gmap.target, "n_samples": count, "max_residual": res})
        bad = [i for i, r in enumerate(res) if r > tol]
        if bad or count == 0:
            raise MomentumMismatch(
                f"gluing {gmap.name} ({gmap.source}->{gmap.target}): functions {[i + 1 for i in bad]} do not descend "
                f"(residuals {res}, {count} samples, tol {tol:g})"
            )
    atlas = system.atlas.extended(transitions=[g.to_transition() for g in maps], name=f"N[{system.name}]")
    report = {"symplectic": sym_rows, "descent": desc_rows, "descent_tol": tol}
    if validate:
        report["atlas"] = validate_atlas(atlas, samples=atlas_samples, seed=seed).to_dict()
    return MomentumSystem(system.n, atlas, system.functions, system.generators, tuple(system.gluings) + tuple(maps), system.name, report)


def build_local_system(model: LocalModel | str, radius: float = 1.0, glued: bool = True, **glue_kwargs) -> MomentumSystem:
    """Cotangent model around one singular point of the given normal form."""
    if isinstance(model, str):
        model = LocalModel.parse(model)
    pieces = build_cotangent_pieces(model, radius)
    if not glued:
        return pieces
    return glue(pieces, model_gluings(model), **glue_kwargs)


@dataclass
class CommutationReport:
    pairs: list[dict]
    tol: float
    finite_differences: bool
    sample_count: int

    @property
    def max_bracket(self) -> float:
        return max((p["max_abs_bracket"] for p in self.pairs), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_bracket <= self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "finite_differences": self.finite_differences,
            "sample_count": self.sample_count,
            "max_abs_bracket": self.max_bracket,
            "pairs": self.pairs,
        }


def _chart_brackets(system: MomentumSystem, cid: str, count: int, box_radius, seed: int, fd: bool) -> list[dict]:
    chart = system.atlas.chart(cid)
    rng = np.random.default_rng(seed)
    if box_radius is None:
        zs = chart.sample(rng, count)
    else:
        zs = rng.uniform(-box_radius, box_radius, size=(count, chart.dim))
    fs = system.functions[cid]
    n = system.n
    worst = {(i, j): 0.0 for i in range(n) for j in range(i + 1, n)}
    if not worst:
        return []
    for z in zs:
        if fd:
            for (i, j) in worst:
                worst[(i, j)] = max(worst[(i, j)], abs(poisson_bracket(fs[i], fs[j], z, finite_differences=True)))
            continue
        grads = [f.grad(z) for f in fs]
        for (i, j) in worst:
            gi, gj = grads[i], grads[j]
            b = gi[:n] @ gj[n:] - gi[n:] @ gj[:n]
            worst[(i, j)] = max(worst[(i, j)], abs(float(b)))
    return [{"chart": cid, "i": i + 1, "j": j + 1, "n_samples": int(len(zs)), "max_abs_bracket": v} for (i, j), v in worst.items()]


def verify_commutation(
    system: MomentumSystem,
    sample_count: int = 10_000,
    box_radius: float | None = None,
    seed: int = 42,
    tol: float | None = None,
    finite_differences: bool = False,
    workers: int = 1,
) -> CommutationReport:
    """Max |{g_i, g_j}| over seeded samples in every chart.

    ``box_radius`` samples the cube [-r, r]^{2n} instead of the chart domain
    (the functions are defined on the whole coordinate space).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    tol = tol if tol is not None else (1e-5 if finite_differences else 1e-9)
    charts = sorted(system.functions)
    jobs = [(c, seed + k) for k, c in enumerate(charts)]
    run = lambda job: _chart_brackets(system, job[0], sample_count, box_radius, job[1], finite_differences)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    pairs = [row for rows in results for row in rows]
    return CommutationReport(pairs, tol, finite_differences, sample_count)


# One-dimensional compact example: a circle with two hyperbolic zeros.


def loop_profile(eps: float) -> PiecewiseProfile:
    """Coefficient of X = a(theta) d/dtheta on [0, 2pi]: a = theta near 0, pi - theta near pi."""
    pi = math.pi
    if not 0 < eps < pi / 4:
        raise ValueError("loop needs 0 < eps < pi/4")
    up0, down, up2 = linear(1.0, 0.0), linear(-1.0, pi), linear(1.0, -2 * pi)
    return PiecewiseProfile(
        [
            Segment(0.0, eps, up0),
            Segment(eps, pi - eps, up0, down),
            Segment(pi - eps, pi + eps, down),
            Segment(pi + eps, 2 * pi - eps, down, up2),
            Segment(2 * pi - eps, 2 * pi, up2),
        ]
    )


def profile_field(profile: PiecewiseProfile, chart: str, shift: float = 0.0, name: str = "") -> VectorField:
    """One-dimensional field a(q + shift) d/dq."""
    return VectorField(
        chart,
        1,
        lambda q: np.array([profile(q[0] + shift)]),
        lambda q: np.array([[profile.d1(q[0] + shift)]]),
        lambda q: np.array([[[profile.d2(q[0] + shift)]]]),
        name,
    )


def _shift_transition(source: str, target: str, shift: float, dim: int, axis: int = 0) -> TransitionMap:
    e = np.zeros(dim)
    e[axis] = shift
    eye = np.eye(dim)
    return TransitionMap(source, target, lambda z: z + e, lambda z: z - e, lambda z: eye, lambda z: eye, name=f"shift {shift:+.6g}")


def band_gluing_1d(source: str = "T*W0", target: str = "T*Wpi") -> GluingMap:
    """(u, p) -> (p, -u)."""
    return GluingMap.of(source, target, ((0, 1), (-1, 0)), "loop band")


def build_hyperbolic_loop(eps: float = 0.3, glued: bool = True, seed: int = 42) -> MomentumSystem:
    """T* of a circle carrying a field with two hyperbolic zeros (theta = 0, pi).

    Un-glued, the fibers over the zeros are non-compact leaves of g = 0;
    gluing the two zero neighbourhoods by (u, p) -> (p, -u) turns the
    level g = 0 into a figure eight.
    """
    pi = math.pi
    prof = loop_profile(eps)
    rho = eps / 4
    charts = [
        Chart("T*W0", (-eps, -eps), (eps, eps), label="T* near theta=0"),
        Chart("T*Wpi", (-eps, -eps), (eps, eps), label="T* near theta=pi"),
        Chart("T*R1", (eps / 2, -rho), (pi - eps / 2, rho), label="T* over (0, pi)"),
        Chart("T*R2", (pi + eps / 2, -rho), (2 * pi - eps / 2, rho), label="T* over (pi, 2pi)"),
    ]
    transitions = [
        _shift_transition("T*W0", "T*R1", 0.0, 2),
        _shift_transition("T*W0", "T*R2", 2 * pi, 2),
        _shift_transition("T*Wpi", "T*R1", pi, 2),
        _shift_transition("T*Wpi", "T*R2", pi, 2),
    ]
    fields = {
        "T*W0": linear_vector_field([[1.0]], None, "W0", "u d/du"),
        "T*Wpi": linear_vector_field([[-1.0]], None, "Wpi", "-u d/du"),
        "T*R1": profile_field(prof, "R1", 0.0, "a(theta) d/dtheta"),
        "T*R2": profile_field(prof, "R2", 0.0, "a(theta) d/dtheta"),
    }
    functions = {cid: [momentum_function(X, cid, "g")] for cid, X in fields.items()}
    system = MomentumSystem(1, Atlas(charts, transitions, name="T*S^1"), functions, {c: [X] for c, X in fields.items()}, name="hyperbolic loop")
    check_representatives(system, tol=1e-12, seed=seed)
    if not glued:
        return system
    return glue(system, [band_gluing_1d()], seed=seed)


def check_representatives(system: MomentumSystem, tol: float = 1e-9, samples: int = 256, seed: int = 42) -> float:
    """Chart representatives of every g_i must agree across ordinary (non-gluing) transitions."""
    from .geometry import overlap_samples

    worst = 0.0
    for (s, t), tm in sorted(system.atlas.transitions.items()):
        if tm.kind == "gluing":
            continue
        for z in overlap_samples(system.atlas, s, t, samples, seed):
            w = system.atlas.map_if_overlap(tm, z)
            for i in range(system.n):
                worst = max(worst, abs(system.functions[t][i](w) - system.functions[s][i](z)))
    if worst > tol:
        raise MomentumMismatch(f"chart representatives disagree on overlaps by {worst:.3e}")
    return worst
