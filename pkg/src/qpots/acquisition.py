"""Batch candidate selection from posterior sample-path Pareto sets.

One acquisition round draws a joint sample path per fitted GP (objectives and
constraints), lets the evolutionary solver find the Pareto set of those
paths, and picks a batch of q candidates from it by greedy maximin distance
to everything already observed.  Constrained rounds apply feasibility
dominance on the sampled constraint paths; when a round produces an empty or
short Pareto set, fresh paths are drawn and candidates accumulate across
retries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import AcquisitionFailureError, InvalidArgumentError
from .gp import GpModel, NystromConfig, LandmarkRule, PathSampler, nondominated_landmarks
from .nsga2 import ConstraintTag, EvolverConfig, minimize
from .pareto import ParetoFront, nondominated_filter


def equality_indicator(sampled_value: float, eq_tolerance: float) -> bool:
    """True when a sampled equality-constraint value counts as feasible."""
    if eq_tolerance < 0:
        raise InvalidArgumentError("eq_tolerance must be nonnegative")
    return bool(abs(sampled_value) <= eq_tolerance)


@dataclass
class AcquisitionRound:
    """Everything one acquisition needs: fitted models, batch size, solver knobs."""

    objective_models: list[GpModel]
    observed_sites: np.ndarray
    evolver: EvolverConfig
    constraint_models: list[GpModel] = field(default_factory=list)
    constraint_tags: tuple[ConstraintTag, ...] = ()
    q: int = 1
    eq_tolerance: float = 1e-2  # standardized output units
    nystrom: NystromConfig = field(default_factory=NystromConfig)
    duplicate_tolerance: float = 1e-9

    def __post_init__(self):
        if self.q < 1:
            raise InvalidArgumentError("q must be >= 1")
        if len(self.objective_models) < 1:
            raise InvalidArgumentError("at least one objective model is required")
        if len(self.constraint_models) != len(self.constraint_tags):
            raise InvalidArgumentError("constraint models and tags must align")
        self.observed_sites = np.atleast_2d(np.asarray(self.observed_sites, dtype=float))

    @property
    def n_obj(self) -> int:
        return len(self.objective_models)

    @property
    def n_constraints(self) -> int:
        return len(self.constraint_models)

    @property
    def dim(self) -> int:
        return self.objective_models[0].data.dim


def _landmarks_for(round_: AcquisitionRound) -> np.ndarray:
    cfg = round_.nystrom
    sites = round_.objective_models[0].data.sites
    if cfg.landmark_rule is LandmarkRule.FIRST_M:
        return sites[: min(cfg.max_landmarks, sites.shape[0])]
    values = np.column_stack([m.data.values for m in round_.objective_models])
    return nondominated_landmarks(sites, values, cfg.max_landmarks)


def _raw_eq_tolerances(round_: AcquisitionRound) -> np.ndarray:
    # eq_tolerance is stated in standardized output units; each constraint
    # model carries its own output scale back to raw units
    return np.array(
        [round_.eq_tolerance * m.y_scale for m in round_.constraint_models], dtype=float
    )


def _warm_start_sites(round_: AcquisitionRound) -> np.ndarray:
    """Observed sites whose observed objective vectors are nondominated.

    Injected into the inner solver's initial population: the sampled paths
    agree with the data near observed sites, so the previous front region is
    almost always worth keeping in the running and the solver stops paying a
    full rediscovery cost every round.  Capped at half the population.
    """
    values = np.column_stack([m.data.values for m in round_.objective_models])
    sites = round_.objective_models[0].data.sites
    idx = nondominated_filter(values)
    return sites[idx[: max(1, round_.evolver.pop_size // 2)]]


def sample_pareto_set(round_: AcquisitionRound, rng, return_sampler: bool = False):
    """Draw one joint sample path per function and return its Pareto front/set.

    The evolutionary solver maximizes the sampled objectives (negated
    internally) under feasibility dominance on the sampled constraints; the
    returned front is in maximization convention.
    """
    models = list(round_.objective_models) + list(round_.constraint_models)
    landmarks = _landmarks_for(round_) if round_.nystrom.enabled else None
    sampler = PathSampler(
        models, rng, landmarks=landmarks, duplicate_tolerance=round_.duplicate_tolerance
    )
    k = round_.n_obj
    c = round_.n_constraints

    def path_eval(x: np.ndarray):
        objs = np.column_stack([sampler.sample(i, x) for i in range(k)])
        if c == 0:
            return -objs
        cons = np.column_stack([sampler.sample(k + j, x) for j in range(c)])
        return -objs, cons

    front_min = minimize(
        path_eval,
        n_var=round_.dim,
        config=round_.evolver,
        constraint_tags=round_.constraint_tags or None,
        eq_tolerance=_raw_eq_tolerances(round_) if c else 0.0,
        initial_population=_warm_start_sites(round_),
    )
    front = ParetoFront(points=-front_min.points, preimages=front_min.preimages)
    if return_sampler:
        return front, sampler
    return front


@dataclass
class CandidateBatch:
    """Selected acquisition points plus the sampled front they came from."""

    points: np.ndarray
    pathwise_front: ParetoFront

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, self.pathwise_front.preimages.shape[-1])

    def __len__(self) -> int:
        return int(self.points.shape[0])


def _dedupe_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    keep: list[int] = []
    for i, row in enumerate(rows):
        if all(np.linalg.norm(row - rows[j]) > tol for j in keep):
            keep.append(i)
    return np.array(keep, dtype=int)


def maximin_select(
    front: ParetoFront,
    observed: np.ndarray,
    q: int,
    duplicate_tolerance: float = 1e-9,
) -> CandidateBatch:
    """Greedy sequential maximin pick of up to q members of the sampled Pareto set.

    Pick i maximizes the minimum Euclidean distance to the observed sites
    plus all earlier picks.  Members duplicating an observed site are skipped
    unless the whole set consists of such duplicates.  Fewer than q returned
    points signals a shortfall the caller handles.
    """
    observed = np.atleast_2d(np.asarray(observed, dtype=float))
    if front.is_empty:
        return CandidateBatch(np.empty((0, observed.shape[1])), front)

    candidates = front.preimages
    unique = _dedupe_rows(candidates, duplicate_tolerance)
    candidates = candidates[unique]

    dist_to_observed = cdist(candidates, observed).min(axis=1)
    fresh = dist_to_observed > duplicate_tolerance
    if np.any(fresh):
        candidates = candidates[fresh]
        dist_to_observed = dist_to_observed[fresh]

    n_pick = min(q, candidates.shape[0])
    min_dist = dist_to_observed.copy()
    picked: list[int] = []
    for _ in range(n_pick):
        i = int(np.argmax(min_dist))
        picked.append(i)
        min_dist = np.minimum(min_dist, cdist(candidates, candidates[i : i + 1]).ravel())
        min_dist[i] = -np.inf
    return CandidateBatch(candidates[picked], front)


def acquire(round_: AcquisitionRound, rng, max_retries: int = 5) -> CandidateBatch:
    """Sample paths, solve, and select until q candidates are gathered.

    Fresh sample paths are drawn whenever the Pareto set comes up empty or
    short; candidates accumulate across retries.  Raises
    :class:`AcquisitionFailureError` when no candidate at all is found within
    ``max_retries`` attempts.
    """
    if max_retries < 1:
        raise InvalidArgumentError("max_retries must be >= 1")
    gathered: list[np.ndarray] = []
    front_points: list[np.ndarray] = []
    front_preimages: list[np.ndarray] = []

    for _ in range(max_retries):
        front = sample_pareto_set(round_, rng)
        observed = round_.observed_sites
        if gathered:
            observed = np.vstack([observed, np.vstack(gathered)])
        batch = maximin_select(
            front, observed, round_.q - len(gathered), round_.duplicate_tolerance
        )
        if len(batch) > 0:
            gathered.extend(batch.points)
            front_points.append(front.points)
            front_preimages.append(front.preimages)
        if len(gathered) >= round_.q:
            break

    if not gathered:
        raise AcquisitionFailureError(
            f"no candidates after {max_retries} sampled Pareto sets (all empty or duplicates)"
        )
    combined = ParetoFront(
        points=np.vstack(front_points), preimages=np.vstack(front_preimages)
    )
    return CandidateBatch(np.vstack(gathered), combined)
