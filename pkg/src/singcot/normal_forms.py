"""Local normal forms, Williamson classification and desingularized branches.

A local model is an ordered product of factors, written compactly as e.g.
``"h*ff*r"``.  Factor ``k`` owns consecutive base slots; phase-space
coordinates are ``(x_1..x_n, y_1..y_n)`` with the x's as base coordinates.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .errors import (
    DegenerateSpectrum,
    EllipticFactorUnsupported,
    NotCritical,
    ParseError,
    SequenceInvalid,
    UnknownLabel,
)
from .geometry import Chart
from .symplectic import ScalarField, poisson_matrix, quadratic_field


class Kind(enum.Enum):
    REGULAR = "r"
    ELLIPTIC = "e"
    HYPERBOLIC = "h"
    FOCUS_FOCUS = "ff"

    @property
    def half_dim(self) -> int:
        return 2 if self is Kind.FOCUS_FOCUS else 1

    @property
    def branch_choices(self) -> tuple[str, ...]:
        # X/Y pick the x- or y-branch (axis or plane); R and E have one fixed choice.
        if self in (Kind.HYPERBOLIC, Kind.FOCUS_FOCUS):
            return ("X", "Y")
        return ("R",) if self is Kind.REGULAR else ("E",)


@dataclass(frozen=True)
class LocalModel:
    factors: tuple[Kind, ...]

    def __post_init__(self):
        if not self.factors:
            raise ParseError("a local model needs at least one factor")

    @classmethod
    def parse(cls, text: str) -> "LocalModel":
        parts = [s.strip().lower() for s in text.split("*")]
        try:
            return cls(tuple(Kind(p) for p in parts))
        except ValueError:
            raise ParseError(f"cannot parse model {text!r}; factors are r, e, h, ff joined by '*'") from None

    def __str__(self) -> str:
        return "*".join(k.value for k in self.factors)

    @property
    def n(self) -> int:
        return sum(k.half_dim for k in self.factors)

    def slots(self) -> list[tuple[Kind, int]]:
        """(kind, first base slot) for every factor."""
        out, s = [], 0
        for k in self.factors:
            out.append((k, s))
            s += k.half_dim
        return out

    def count(self, kind: Kind) -> int:
        return sum(1 for k in self.factors if k is kind)

    def require_no_elliptic(self):
        if Kind.ELLIPTIC in self.factors:
            raise EllipticFactorUnsupported(f"model {self} has an elliptic factor; the construction needs k_e = 0")


def parse_model(text: str) -> LocalModel:
    return LocalModel.parse(text)


@dataclass(frozen=True)
class WilliamsonType:
    k_e: int
    k_h: int
    k_f: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.k_e, self.k_h, self.k_f)


@dataclass(frozen=True)
class LeafType:
    k_e: int
    k_h: int
    k_f: int
    c: int
    o: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.k_e, self.k_h, self.k_f, self.c, self.o)


def leaf_type_valid(lt: LeafType, n: int) -> bool:
    return lt.k_e + lt.k_h + 2 * lt.k_f + lt.c + lt.o == n


def model_chart(model: LocalModel) -> Chart:
    inf = float("inf")
    return Chart(f"R^{2 * model.n}[{model}]", (-inf,) * (2 * model.n), (inf,) * (2 * model.n), label=f"model {model}")


def model_functions(model: LocalModel, chart: str | None = None) -> list[ScalarField]:
    """The normal-form functions h_1..h_n on R^{2n}."""
    n = model.n
    chart = chart or model_chart(model).id
    out = []

    def xi(i):
        return i

    def yi(i):
        return n + i

    for kind, s in model.slots():
        if kind is Kind.REGULAR:
            b = np.zeros(2 * n)
            b[yi(s)] = 1.0
            out.append(quadratic_field(np.zeros((2 * n, 2 * n)), b, chart, f"y{s + 1}"))
        elif kind is Kind.ELLIPTIC:
            Q = np.zeros((2 * n, 2 * n))
            Q[xi(s), xi(s)] = Q[yi(s), yi(s)] = 2.0
            out.append(quadratic_field(Q, None, chart, f"x{s + 1}^2+y{s + 1}^2"))
        elif kind is Kind.HYPERBOLIC:
            Q = np.zeros((2 * n, 2 * n))
            Q[xi(s), yi(s)] = Q[yi(s), xi(s)] = 1.0
            out.append(quadratic_field(Q, None, chart, f"x{s + 1}y{s + 1}"))
        else:
            a, b = s, s + 1
            Q1 = np.zeros((2 * n, 2 * n))
            Q1[xi(a), yi(a)] = Q1[yi(a), xi(a)] = 1.0
            Q1[xi(b), yi(b)] = Q1[yi(b), xi(b)] = 1.0
            # x_a y_b - y_a x_b
            Q2 = np.zeros((2 * n, 2 * n))
            Q2[xi(a), yi(b)] = Q2[yi(b), xi(a)] = 1.0
            Q2[yi(a), xi(b)] = Q2[xi(b), yi(a)] = -1.0
            out.append(quadratic_field(Q1, None, chart, f"x{a + 1}y{a + 1}+x{b + 1}y{b + 1}"))
            out.append(quadratic_field(Q2, None, chart, f"x{a + 1}y{b + 1}-y{a + 1}x{b + 1}"))
    return out


def spectrum_pattern(eigenvalues: np.ndarray, tol: float = 1e-8) -> WilliamsonType:
    """Count imaginary pairs, real pairs and complex quadruples; zero eigenvalues are skipped."""
    lam = np.asarray(eigenvalues)
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    t = tol * scale
    nonzero = lam[np.abs(lam) > t]
    imag = np.sum(np.abs(nonzero.real) <= t)
    real = np.sum(np.abs(nonzero.imag) <= t)
    cplx = nonzero.size - imag - real
    if imag % 2 or real % 2 or cplx % 4:
        raise DegenerateSpectrum(f"eigenvalues {lam} do not split into pairs/quadruples")
    return WilliamsonType(int(imag // 2), int(real // 2), int(cplx // 4))


def classify_fixed_point(
    functions: list[ScalarField], z, trials: int = 7, seed: int = 42, tol: float = 1e-8
) -> WilliamsonType:
    """Williamson type of a common critical point from the spectrum of J Hess(sum c_i h_i)."""
    z = np.asarray(z, dtype=float)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for f in functions:
        if np.max(np.abs(f.grad(z))) > 1e-10:
            raise NotCritical(f"{f.name or 'function'} has nonzero differential at {tuple(z)}")
    J = poisson_matrix(z.size // 2)
    hessians = [f.hess(z) for f in functions]
    rng = np.random.default_rng(seed)
    votes: Counter = Counter()
    for _ in range(trials):
        c = rng.normal(size=len(functions))
        A = J @ sum(ci * H for ci, H in zip(c, hessians))
        try:
            votes[spectrum_pattern(np.linalg.eigvals(A), tol)] += 1
        except DegenerateSpectrum:
            votes[None] += 1
    best, count = votes.most_common(1)[0]
    if best is None or count * 2 <= trials:
        raise DegenerateSpectrum(f"unstable eigenvalue pattern across trials: {dict(votes)}")
    return best


def classify_model(model: LocalModel, trials: int = 7, seed: int = 42) -> WilliamsonType:
    """Type of the model at the origin; regular factors are not critical and are left out."""
    fs = model_functions(model)
    crit = []
    i = 0
    for kind, _ in model.slots():
        for _ in range(kind.half_dim):
            if kind is not Kind.REGULAR:
                crit.append(fs[i])
            i += 1
    if not crit:
        return WilliamsonType(0, 0, 0)
    return classify_fixed_point(crit, np.zeros(2 * model.n), trials, seed)


BranchLabel = tuple[str, ...]


def label_str(label: BranchLabel) -> str:
    return "".join(label)


def enumerate_branches(model: LocalModel) -> list[BranchLabel]:
    return list(itertools.product(*(k.branch_choices for k in model.factors)))


def branch_count(model: LocalModel) -> int:
    return 2 ** (model.count(Kind.HYPERBOLIC) + model.count(Kind.FOCUS_FOCUS))


@dataclass(frozen=True)
class SubspaceRep:
    frame: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        if not np.allclose(f.T @ f, np.eye(f.shape[1]), atol=1e-10):
            raise ValueError("frame is not column-orthonormal")

    @classmethod
    def span(cls, vectors: np.ndarray) -> "SubspaceRep":
        q, _ = np.linalg.qr(np.asarray(vectors, dtype=float))
        return cls(q)

    @property
    def k(self) -> int:
        return self.frame.shape[1]


def principal_angles(a: SubspaceRep, b: SubspaceRep) -> np.ndarray:
    return np.sort(subspace_angles(a.frame, b.frame))


@dataclass(frozen=True)
class BranchChart:
    model: LocalModel
    label: BranchLabel
    chart: Chart
    axes: tuple[int, ...]  # phase-space index carried by each chart coordinate
    plane: SubspaceRep

    def immersion(self, c) -> np.ndarray:
        z = np.zeros(2 * self.model.n)
        z[list(self.axes)] = np.asarray(c, dtype=float)
        return z

    @property
    def differential(self) -> np.ndarray:
        """Jacobian of the immersion, a 2n x n selection matrix."""
        D = np.zeros((2 * self.model.n, self.model.n))
        for k, ax in enumerate(self.axes):
            D[ax, k] = 1.0
        return D


def _validate_label(model: LocalModel, label) -> BranchLabel:
    label = tuple(label)
    if label not in enumerate_branches(model):
        raise UnknownLabel(f"{label_str(label)!r} is not a branch of {model}")
    return label


def branch_chart(model: LocalModel, label, radius: float = 1.0) -> BranchChart:
    """Chart on the branch of the desingularized level selected by ``label``."""
    model.require_no_elliptic()
    label = _validate_label(model, label)
    n = model.n
    axes = []
    for (kind, s), choice in zip(model.slots(), label):
        for k in range(kind.half_dim):
            axes.append(s + k if choice in ("X", "R") else n + s + k)
    frame = np.zeros((2 * n, n))
    for k, ax in enumerate(axes):
        frame[ax, k] = 1.0
    chart = Chart(f"L[{model}:{label_str(label)}]", (-radius,) * n, (radius,) * n, label=f"branch {label_str(label)} of {model}")
    return BranchChart(model, label, chart, tuple(axes), SubspaceRep(frame))


def level_tangent_plane(model: LocalModel, z, rank_tol: float = 1e-12) -> SubspaceRep:
    """Tangent plane of the level at a regular point: the kernel of d(h_1..h_n)."""
    fs = model_functions(model)
    D = np.array([f.grad(z) for f in fs])
    _, s, vt = np.linalg.svd(D)
    if s[-1] < rank_tol * max(1.0, s[0]):
        raise SequenceInvalid(f"level is not regular at {tuple(z)} (singular values {s})")
    return SubspaceRep(vt[model.n :].T)


@dataclass
class TangentLimitReport:
    label: str
    t: list[float]
    angles: list[float]
    tol: float

    @property
    def passed(self) -> bool:
        tail_ok = all(b <= a + 1e-12 for a, b in zip(self.angles, self.angles[1:]))
        return self.angles[-1] <= self.tol and tail_ok

    def to_dict(self) -> dict:
        return {"label": self.label, "t": self.t, "angles": self.angles, "tol": self.tol, "passed": self.passed}


def tangent_plane_limit(model: LocalModel, label, t_sequence, direction=None, tol: float = 1e-4) -> TangentLimitReport:
    """Principal angle between the level's tangent plane at j(t u) and the branch's limit plane."""
    t = [float(v) for v in t_sequence]
    if not t or any(v <= 0 for v in t) or any(b >= a for a, b in zip(t, t[1:])):
        raise SequenceInvalid("t_sequence must be positive and strictly decreasing")
    bc = branch_chart(model, label)
    u = np.ones(model.n) if direction is None else np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    angles = []
    for tk in t:
        plane = level_tangent_plane(model, bc.immersion(tk * u))
        angles.append(float(np.max(principal_angles(plane, bc.plane))))
    return TangentLimitReport(label_str(bc.label), t, angles, tol)
