"""Registry of multiobjective benchmark problems.

Each problem bundles box bounds in natural units, vectorized objective and
constraint oracles, a hypervolume reference point, and (where a closed form
exists) a dense sample of the analytic Pareto front.  The benchmark
literature states these problems as minimization; `evaluate` negates
objectives so the rest of the package can work in a single maximization
convention.  Inequality constraints are reported as g(x) with feasibility
g >= 0.

Sources for the functional forms:
  - Branin: Dixon & Szego (1978) test function collection.
  - Currin: Currin et al. (1991) exponential function.
  - ZDT3: Zitzler, Deb & Thiele (2000).
  - DTLZ3 / DTLZ7: Deb, Thiele, Laumanns & Zitzler (2002).
  - OSY: Osyczka & Kundu (1995).
  - Vehicle crashworthiness: Liao et al. (2008), via Tanabe & Ishibuchi (2020).
  - Car side impact: Jain & Deb (2014) (stochastic variables fixed at their
    nominal values, which collapses some coefficients).
  - Disc brake: Ray & Liew (2002), via Tanabe & Ishibuchi (2020).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, NotAvailableError
from .nsga2 import ConstraintTag


@dataclass(frozen=True)
class Problem:
    """An oracle bundle: objectives, optional constraints, box domain, HV reference."""

    name: str
    bounds: np.ndarray  # (d, 2) natural-unit (lo, hi) pairs
    n_obj: int
    raw_objectives: Callable  # (P, d) natural units -> (P, K), minimization convention
    constraints: Callable | None = None  # (P, d) -> (P, C), feasible at >= 0
    constraint_tags: tuple[ConstraintTag, ...] = ()
    reference_point: np.ndarray | None = None  # maximization convention
    analytic_front_fn: Callable | None = None  # (m) -> (m, K) raw front sample

    def __post_init__(self):
        bounds = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "bounds", bounds)
        if bounds.shape[1] != 2 or np.any(bounds[:, 0] >= bounds[:, 1]):
            raise InvalidArgumentError("bounds must be (d, 2) with lo < hi")
        if self.reference_point is not None:
            object.__setattr__(
                self, "reference_point", np.asarray(self.reference_point, dtype=float)
            )

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def n_constraints(self) -> int:
        return len(self.constraint_tags)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (x - lo) / (hi - lo)

    def denormalize(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + u * (hi - lo)

    def _check_bounds(self, x: np.ndarray) -> None:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        span = hi - lo
        if np.any(x < lo - 1e-9 * span) or np.any(x > hi + 1e-9 * span):
            raise InvalidArgumentError(f"input outside the {self.name} domain")

    def evaluate(self, x):
        """Noiseless objectives (maximization convention) and constraint values."""
        xs = np.asarray(x, dtype=float)
        single = xs.ndim == 1
        xs = np.atleast_2d(xs)
        if xs.shape[1] != self.dim:
            raise InvalidArgumentError(f"{self.name} expects {self.dim} inputs")
        self._check_bounds(xs)
        objs = -np.atleast_2d(np.asarray(self.raw_objectives(xs), dtype=float))
        cons = (
            np.atleast_2d(np.asarray(self.constraints(xs), dtype=float))
            if self.constraints is not None
            else np.zeros((xs.shape[0], 0))
        )
        if single:
            return objs[0], cons[0]
        return objs, cons

    def evaluate_raw(self, x):
        """Objectives in the literature's minimization convention."""
        objs, _ = self.evaluate(x)
        return -objs


@dataclass
class NoisyOracle:
    """Problem oracle observed through additive i.i.d. Gaussian noise."""

    problem: Problem
    noise_variance: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def observe(self, x):
        objs, cons = self.problem.evaluate(x)
        if self.noise_variance <= 0:
            return objs, cons
        sd = float(np.sqrt(self.noise_variance))
        single = objs.ndim == 1
        objs = np.atleast_2d(objs)
        cons = np.atleast_2d(cons)
        noise = self.rng.standard_normal((objs.shape[0], objs.shape[1] + cons.shape[1])) * sd
        objs = objs + noise[:, : objs.shape[1]]
        cons = cons + noise[:, objs.shape[1] :]
        if single:
            return objs[0], cons[0]
        return objs, cons


def evaluate(problem: Problem, x):
    """Module-level alias for :meth:`Problem.evaluate`."""
    return problem.evaluate(x)


def observe(oracle: NoisyOracle, x):
    """Module-level alias for :meth:`NoisyOracle.observe`."""
    return oracle.observe(x)


def analytic_front_sample(problem: Problem, m: int) -> np.ndarray:
    """m points densely sampled on the analytic front (raw convention).

    Points are ordered by increasing first objective, so ``m = 1`` yields the
    front's lexicographic extreme.
    """
    if problem.analytic_front_fn is None:
        raise NotAvailableError(f"{problem.name} has no closed-form Pareto front")
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    return problem.analytic_front_fn(m)


def _min_front_2d(f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """Nondominated subset of a 2-D minimization curve, sorted by f1."""
    order = np.lexsort((f2, f1))
    f1s, f2s = f1[order], f2[order]
    best = np.inf
    keep = []
    for i in range(f1s.size):
        if f2s[i] < best - 1e-15:
            keep.append(i)
            best = f2s[i]
    return np.column_stack([f1s[keep], f2s[keep]])


def _subsample(front: np.ndarray, m: int) -> np.ndarray:
    idx = np.unique(np.linspace(0, front.shape[0] - 1, m).round().astype(int))
    out = front[idx]
    if out.shape[0] < m:  # duplicates collapsed; pad from the dense front
        extra = front[np.linspace(0, front.shape[0] - 1, m).astype(int)]
        out = extra
    return out[:m]


# ---------------------------------------------------------------------------
# Synthetic problems
# ---------------------------------------------------------------------------


def _branin(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    a = 1.0
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    r = 6.0
    s = 10.0
    t = 1.0 / (8.0 * np.pi)
    return a * (v - b * u**2 + c * u - r) ** 2 + s * (1 - t) * np.cos(u) + s


def _currin(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        damp = np.where(x2 > 0, 1.0 - np.exp(-1.0 / (2.0 * np.maximum(x2, 1e-300))), 1.0)
    num = 2300 * x1**3 + 1900 * x1**2 + 2092 * x1 + 60
    den = 100 * x1**3 + 500 * x1**2 + 4 * x1 + 20
    return damp * num / den


def branin_currin() -> Problem:
    """Branin and Currin objectives on the shared unit square (d=2, K=2)."""

    def objectives(x):
        u = 15.0 * x[:, 0] - 5.0
        v = 15.0 * x[:, 1]
        return np.column_stack([_branin(u, v), _currin(x[:, 0], x[:, 1])])

    return Problem(
        name="branin-currin",
        bounds=np.array([[0.0, 1.0], [0.0, 1.0]]),
        n_obj=2,
        raw_objectives=objectives,
        reference_point=-np.array([18.0, 6.0]),  # raw-convention ref (18, 6)
    )


def zdt3(d: int = 6) -> Problem:
    """ZDT3: bi-objective with five disconnected front segments."""

    def objectives(x):
        f1 = x[:, 0]
        g = 1.0 + 9.0 * x[:, 1:].sum(axis=1) / (d - 1)
        h = 1.0 - np.sqrt(f1 / g) - (f1 / g) * np.sin(10.0 * np.pi * f1)
        return np.column_stack([f1, g * h])

    def front(m):
        x1 = np.linspace(0.0, 1.0, 200001)
        f2 = 1.0 - np.sqrt(x1) - x1 * np.sin(10.0 * np.pi * x1)
        return _subsample(_min_front_2d(x1, f2), m)

    return Problem(
        name="zdt3",
        bounds=np.tile([0.0, 1.0], (d, 1)),
        n_obj=2,
        raw_objectives=objectives,
        reference_point=-np.array([11.0, 11.0]),  # raw-convention ref (11, 11)
        analytic_front_fn=front,
    )


def _dtlz_g3(xm: np.ndarray) -> np.ndarray:
    z = xm - 0.5
    return 100.0 * (xm.shape[1] + (z**2 - np.cos(20.0 * np.pi * z)).sum(axis=1))


def dtlz3(d: int = 10, k: int = 2) -> Problem:
    """DTLZ3: multimodal distance function, spherical front."""
    if k not in (2, 3):
        raise InvalidArgumentError("dtlz3 is registered for 2 or 3 objectives")

    def objectives(x):
        g = _dtlz_g3(x[:, k - 1 :])
        theta = x[:, : k - 1] * np.pi / 2.0
        objs = np.empty((x.shape[0], k))
        for i in range(k):
            f = 1.0 + g
            for j in range(k - 1 - i):
                f = f * np.cos(theta[:, j])
            if i > 0:
                f = f * np.sin(theta[:, k - 1 - i])
            objs[:, i] = f
        return objs

    def front(m):
        if k == 2:
            t = np.linspace(np.pi / 2.0, 0.0, m)
            return np.column_stack([np.cos(t), np.sin(t)])
        g = int(np.ceil(np.sqrt(m)))
        t1, t2 = np.meshgrid(np.linspace(0, np.pi / 2, g), np.linspace(0, np.pi / 2, g))
        pts = np.column_stack(
            [
                (np.cos(t1) * np.cos(t2)).ravel(),
                (np.cos(t1) * np.sin(t2)).ravel(),
                np.sin(t1).ravel(),
            ]
        )
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        return _subsample(pts[order], m)

    return Problem(
        name="dtlz3",
        bounds=np.tile([0.0, 1.0], (d, 1)),
        n_obj=k,
        raw_objectives=objectives,
        reference_point=-np.full(k, 1500.0),  # raw-convention ref (1500, ...)
        analytic_front_fn=front,
    )


def dtlz7(d: int = 6, k: int = 3) -> Problem:
    """DTLZ7: disconnected front with 2^(K-1) regions."""
    if k not in (2, 3):
        raise InvalidArgumentError("dtlz7 is registered for 2 or 3 objectives")

    def objectives(x):
        g = 1.0 + 9.0 * x[:, k - 1 :].mean(axis=1)
        f_head = x[:, : k - 1]
        h = k - (f_head / (1.0 + g)[:, None] * (1.0 + np.sin(3.0 * np.pi * f_head))).sum(axis=1)
        return np.column_stack([f_head, (1.0 + g) * h])

    def front(m):
        # front at g = 1: f_k = 2 * (k - sum f_i/2 (1 + sin(3 pi f_i)))
        if k == 2:
            f1 = np.linspace(0.0, 1.0, 200001)
            fk = 2.0 * (2.0 - f1 / 2.0 * (1.0 + np.sin(3.0 * np.pi * f1)))
            return _subsample(_min_front_2d(f1, fk), m)
        g = 130
        f1, f2 = np.meshgrid(np.linspace(0, 1, g), np.linspace(0, 1, g))
        f1, f2 = f1.ravel(), f2.ravel()
        fk = 2.0 * (
            3.0
            - f1 / 2.0 * (1.0 + np.sin(3.0 * np.pi * f1))
            - f2 / 2.0 * (1.0 + np.sin(3.0 * np.pi * f2))
        )
        pts = np.column_stack([f1, f2, fk])
        from .pareto import nondominated_filter

        keep = nondominated_filter(-pts)
        pts = pts[keep]
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        return _subsample(pts[order], m)

    return Problem(
        name="dtlz7",
        bounds=np.tile([0.0, 1.0], (d, 1)),
        n_obj=k,
        raw_objectives=objectives,
        reference_point=-np.array([1.1] * (k - 1) + [34.0]),
        analytic_front_fn=front,
    )


def osy() -> Problem:
    """OSY: d=6, K=2, six inequality constraints (Osyczka & Kundu 1995)."""

    def objectives(x):
        f1 = -(
            25.0 * (x[:, 0] - 2.0) ** 2
            + (x[:, 1] - 2.0) ** 2
            + (x[:, 2] - 1.0) ** 2
            + (x[:, 3] - 4.0) ** 2
            + (x[:, 4] - 1.0) ** 2
        )
        f2 = (x**2).sum(axis=1)
        return np.column_stack([f1, f2])

    def constraints(x):
        return np.column_stack(
            [
                x[:, 0] + x[:, 1] - 2.0,
                6.0 - x[:, 0] - x[:, 1],
                2.0 + x[:, 0] - x[:, 1],
                2.0 - x[:, 0] + 3.0 * x[:, 1],
                4.0 - (x[:, 2] - 3.0) ** 2 - x[:, 3],
                (x[:, 4] - 3.0) ** 2 + x[:, 5] - 4.0,
            ]
        )

    return Problem(
        name="osy",
        bounds=np.array([[0, 10], [0, 10], [1, 5], [0, 6], [1, 5], [0, 10]], dtype=float),
        n_obj=2,
        raw_objectives=objectives,
        constraints=constraints,
        constraint_tags=(ConstraintTag.INEQUALITY,) * 6,
        reference_point=-np.array([1.0, 390.0]),
    )


def constrained_demo() -> Problem:
    """Constrained bi-objective toy with an analytically known front.

    minimize f1 = 100 (x1^2 + x2^2), f2 = (x1 - 1)^2 + x2^2 on [-2, 2]^2
    subject to x1 in [0.1, 0.9] and x1 outside (0.4, 0.6), expressed through
    two smooth inequality constraints.  The front is x2 = 0,
    x1 in [0.1, 0.4] u [0.6, 0.9].
    """

    def objectives(x):
        f1 = 100.0 * (x[:, 0] ** 2 + x[:, 1] ** 2)
        f2 = (x[:, 0] - 1.0) ** 2 + x[:, 1] ** 2
        return np.column_stack([f1, f2])

    def constraints(x):
        c1 = -2.0 * (x[:, 0] - 0.1) * (x[:, 0] - 0.9) / 0.18
        c2 = 20.0 * (x[:, 0] - 0.4) * (x[:, 0] - 0.6) / 4.8
        return np.column_stack([c1, c2])

    def front(m):
        x1 = np.concatenate([np.linspace(0.1, 0.4, 5000), np.linspace(0.6, 0.9, 5000)])
        pts = np.column_stack([100.0 * x1**2, (x1 - 1.0) ** 2])
        return _subsample(pts, m)

    return Problem(
        name="constrained-demo",
        bounds=np.array([[-2.0, 2.0], [-2.0, 2.0]]),
        n_obj=2,
        raw_objectives=objectives,
        constraints=constraints,
        constraint_tags=(ConstraintTag.INEQUALITY,) * 2,
        reference_point=-np.array([850.0, 14.0]),
        analytic_front_fn=front,
    )


# ---------------------------------------------------------------------------
# Real-world response-surface problems
# ---------------------------------------------------------------------------


def vehicle_safety() -> Problem:
    """Vehicle crashworthiness: mass, crash acceleration, toe-board intrusion (d=5, K=3)."""

    def objectives(x):
        x1, x2, x3, x4, x5 = (x[:, i] for i in range(5))
        f1 = (
            1640.2823
            + 2.3573285 * x1
            + 2.3220035 * x2
            + 4.5688768 * x3
            + 7.7213633 * x4
            + 4.4559504 * x5
        )
        f2 = (
            6.5856
            + 1.15 * x1
            - 1.0427 * x2
            + 0.9738 * x3
            + 0.8364 * x4
            - 0.3695 * x1 * x4
            + 0.0861 * x1 * x5
            + 0.3628 * x2 * x4
            - 0.1106 * x1**2
            - 0.3437 * x3**2
            + 0.1764 * x4**2
        )
        f3 = (
            -0.0551
            + 0.0181 * x1
            + 0.1024 * x2
            + 0.0421 * x3
            - 0.0073 * x1 * x2
            + 0.024 * x2 * x3
            - 0.0118 * x2 * x4
            - 0.0204 * x3 * x4
            - 0.008 * x3 * x5
            - 0.0241 * x2**2
            + 0.0109 * x4**2
        )
        return np.column_stack([f1, f2, f3])

    return Problem(
        name="vehicle-safety",
        bounds=np.tile([1.0, 3.0], (5, 1)),
        n_obj=3,
        raw_objectives=objectives,
        reference_point=-np.array([1705.0, 13.0, 0.8]),
    )


def car_side_impact() -> Problem:
    """Car side impact: weight, pubic force, V-pillar velocity, max constraint violation.

    Registered as an unconstrained 4-objective problem; the ten limit-state
    constraints enter through the fourth objective (their maximum violation).
    """

    def _responses(x):
        x1, x2, x3, x4, x5, x6, x7 = (x[:, i] for i in range(7))
        weight = (
            1.98
            + 4.9 * x1
            + 6.67 * x2
            + 6.98 * x3
            + 4.01 * x4
            + 1.78 * x5
            + 1e-5 * x6
            + 2.73 * x7
        )
        pubic_force = 4.72 - 0.5 * x4 - 0.19 * x2 * x3
        v_mbp = 10.58 - 0.674 * x1 * x2 - 0.67275 * x2
        v_fd = 16.45 - 0.489 * x3 * x7 - 0.843 * x5 * x6
        limit_states = [
            (1.16 - 0.3717 * x2 * x4 - 0.0092928 * x3, 1.0),
            (
                0.261
                - 0.0159 * x1 * x2
                - 0.06486 * x1
                - 0.019 * x2 * x7
                + 0.0144 * x3 * x5
                + 0.0154464 * x6,
                0.32,
            ),
            (
                0.214
                + 0.00817 * x5
                - 0.045195 * x1
                - 0.0135168 * x1
                + 0.03099 * x2 * x6
                - 0.018 * x2 * x7
                + 0.007176 * x3
                + 0.023232 * x3
                - 0.00364 * x5 * x6
                - 0.018 * x2**2,
                0.32,
            ),
            (0.74 - 0.61 * x2 - 0.031296 * x3 - 0.031872 * x7 + 0.227 * x2**2, 0.32),
            (28.98 + 3.818 * x3 - 4.2 * x1 * x2 + 1.27296 * x6 - 2.68065 * x7, 32.0),
            (
                33.86 + 2.95 * x3 - 5.057 * x1 * x2 - 3.795 * x2 - 3.4431 * x7 + 1.45728,
                32.0,
            ),
            (46.36 - 9.9 * x2 - 4.4505 * x1, 32.0),
            (pubic_force, 4.0),
            (v_mbp, 9.9),
            (v_fd, 15.7),
        ]
        violation = np.zeros(x.shape[0])
        for value, limit in limit_states:
            violation = np.maximum(violation, np.maximum(0.0, value - limit))
        return weight, pubic_force, 0.5 * (v_mbp + v_fd), violation

    def objectives(x):
        return np.column_stack(_responses(x))

    return Problem(
        name="car-side-impact",
        bounds=np.array(
            [
                [0.5, 1.5],
                [0.45, 1.35],
                [0.5, 1.5],
                [0.5, 1.5],
                [0.875, 2.625],
                [0.4, 1.2],
                [0.4, 1.2],
            ]
        ),
        n_obj=4,
        raw_objectives=objectives,
        reference_point=-np.array([43.0, 4.6, 13.2, 9.0]),
    )


def disc_brake() -> Problem:
    """Disc brake design: mass and stopping time, four inequality constraints.

    The published bounds allow the inner radius to exceed the outer radius,
    where the response surface is singular; denominators are clamped in
    magnitude so the oracle stays finite on the closed box (constraint c1
    excludes that region from the feasible set anyway).
    """

    def _safe(d):
        return np.where(np.abs(d) < 1e-9, np.where(d < 0, -1e-9, 1e-9), d)

    def objectives(x):
        x1, x2, x3, x4 = (x[:, i] for i in range(4))
        ring = x2**2 - x1**2
        f1 = 4.9e-5 * ring * (x4 - 1.0)
        f2 = 9.82e6 * ring / _safe(x3 * x4 * (x2**3 - x1**3))
        return np.column_stack([f1, f2])

    def constraints(x):
        x1, x2, x3, x4 = (x[:, i] for i in range(4))
        ring = x2**2 - x1**2
        cube = x2**3 - x1**3
        return np.column_stack(
            [
                (x2 - x1) - 20.0,
                0.4 - x3 / _safe(3.14 * ring),
                1.0 - 2.22e-3 * x3 * cube / _safe(ring**2),
                2.66e-2 * x3 * x4 * cube / _safe(ring) - 900.0,
            ]
        )

    return Problem(
        name="disc-brake",
        bounds=np.array([[55.0, 80.0], [75.0, 110.0], [1000.0, 3000.0], [11.0, 20.0]]),
        n_obj=2,
        raw_objectives=objectives,
        constraints=constraints,
        constraint_tags=(ConstraintTag.INEQUALITY,) * 4,
        reference_point=-np.array([10.0, 30.0]),
    )


_REGISTRY: dict[str, Callable[[], Problem]] = {
    "branin-currin": branin_currin,
    "zdt3": zdt3,
    "dtlz3": dtlz3,
    "dtlz7": dtlz7,
    "osy": osy,
    "constrained-demo": constrained_demo,
    "vehicle-safety": vehicle_safety,
    "car-side-impact": car_side_impact,
    "disc-brake": disc_brake,
}


def list_problems() -> list[str]:
    return sorted(_REGISTRY)


def get_problem(name: str, **kwargs) -> Problem:
    """Look up a problem by registry name (hyphen/underscore insensitive)."""
    key = name.strip().lower().replace("_", "-")
    if key not in _REGISTRY:
        raise NotAvailableError(f"unknown problem {name!r}; known: {', '.join(list_problems())}")
    return _REGISTRY[key](**kwargs)
