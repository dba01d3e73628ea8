import numpy as np
import pytest

from echochamber.constants import EquilibriumKind, Normalization
from echochamber.dynamics import OpinionState, PlatformParams, Trajectory, integrate, vector_field
from echochamber.equilibrium import (
    classify_limit,
    detect_equilibrium,
    equilibrium_residual,
    lyapunov_dissipation,
    lyapunov_value,
    polarization_of,
)
from echochamber.errors import InvalidArgument, PreconditionViolation
from echochamber.graph import InfluenceGraph


def test_residual_vanishes_at_the_disagreement_equilibrium(pair, platform) -> None:
    state = OpinionState(np.array([-1 / 3, 1 / 3]))
    assert equilibrium_residual(state, pair, platform) == pytest.approx(0.0, abs=1e-15)
    assert equilibrium_residual(OpinionState(np.array([-0.4, 0.4])), pair, platform) > 0.1


def test_classify_limit() -> None:
    assert classify_limit(np.array([1.0, 1.0 - 1e-6]), 1e-6) is EquilibriumKind.consensus_plus
    assert classify_limit(np.array([-1.0, -1.0]), 1e-6) is EquilibriumKind.consensus_minus
    assert classify_limit(np.array([-0.3, 0.3]), 1e-6) is EquilibriumKind.persistent_disagreement
    assert classify_limit(np.array([0.5, 0.5]), 1e-6, alpha=0.5) is EquilibriumKind.consensus_plus


def test_polarization_of_blocks_and_pairs(pair) -> None:
    assert polarization_of(np.array([-0.25, 0.5]), pair) == pytest.approx(0.75)
    unlabeled = InfluenceGraph.directed_cycle(3)
    assert polarization_of(np.zeros(3), unlabeled) is None


def test_detects_persistent_disagreement(pair, platform) -> None:
    trajectory = integrate(OpinionState(np.array([-0.4, 0.4])), pair, platform, 40.0, 1e-3, sample_every=0.01)
    report = detect_equilibrium(trajectory, pair, platform, tol=1e-6, window=1.0)
    assert report.kind is EquilibriumKind.persistent_disagreement
    assert report.converged
    np.testing.assert_allclose(report.limit.opinions, [-1 / 3, 1 / 3], atol=1e-5)
    assert report.polarization == pytest.approx(2 / 3, abs=1e-5)
    assert 0 < report.settle_time < 40.0
    assert report.to_json()["kind"] == "PersistentDisagreement"


def test_short_trajectory_is_undetermined(pair, platform) -> None:
    trajectory = integrate(OpinionState(np.array([-0.4, 0.4])), pair, platform, 0.5, 1e-3)
    report = detect_equilibrium(trajectory, pair, platform, tol=1e-6, window=1.0)
    assert report.kind is EquilibriumKind.undetermined
    assert report.limit is None


def test_still_moving_is_non_convergent(pair, platform) -> None:
    trajectory = integrate(OpinionState(np.array([-0.4, 0.4])), pair, platform, 2.0, 1e-3)
    report = detect_equilibrium(trajectory, pair, platform, tol=1e-6, window=1.0)
    assert report.kind is EquilibriumKind.non_convergent
    assert not report.converged


def test_detect_rejects_bad_arguments(pair, platform) -> None:
    trajectory = Trajectory(times=np.array([0.0]), states=np.zeros((1, 2)), step_size=1.0)
    with pytest.raises(InvalidArgument):
        detect_equilibrium(trajectory, pair, platform, tol=0.0)


def test_lyapunov_value_never_increases(pair, platform) -> None:
    trajectory = integrate(OpinionState(np.array([-0.1, 0.8])), pair, platform, 10.0, 1e-3, sample_every=0.05)
    values = np.array([lyapunov_value(state, pair, platform) for state in trajectory])
    assert (np.diff(values) <= 1e-12).all()
    assert lyapunov_dissipation(trajectory.final, pair, platform) < lyapunov_dissipation(trajectory[0], pair, platform)


def test_lyapunov_dissipation_matches_the_field_norm(pair, platform) -> None:
    state = OpinionState(np.array([-0.2, 0.005]))
    field_norm = equilibrium_residual(state, pair, platform)
    # the pair has two components, so the squared 2-norm sits between inf^2 and 2 inf^2
    assert field_norm**2 <= lyapunov_dissipation(state, pair, platform) <= 2 * field_norm**2 + 1e-15


def test_lyapunov_needs_symmetric_weights(platform) -> None:
    cycle = InfluenceGraph.directed_cycle(4)
    with pytest.raises(PreconditionViolation):
        lyapunov_value(OpinionState(np.zeros(4)), cycle, platform)
    with pytest.raises(PreconditionViolation):
        lyapunov_dissipation(OpinionState(np.zeros(4)), cycle, PlatformParams.uniform(1.0))


def test_lyapunov_decreases_on_random_symmetric_graphs(rng) -> None:
    for _ in range(10):
        n = int(rng.integers(3, 8))
        upper = np.triu((rng.random((n, n)) < 0.5).astype(float), k=1)
        budget = float(rng.uniform(0.2, 1.5))
        graph = InfluenceGraph.from_adjacency(upper + upper.T, Normalization.unit_weight, a=budget)
        platform = PlatformParams(b=rng.uniform(0.5, 2.0, n), epsilon=0.05)
        x0 = OpinionState(rng.uniform(-1.5, 1.5, n))
        trajectory = integrate(x0, graph, platform, 10.0, 0.01, sample_every=0.05)
        values = np.array([lyapunov_value(state, graph, platform) for state in trajectory])
        assert (np.diff(values) <= 1e-10).all()


def test_lyapunov_dissipation_is_the_squared_field(pair) -> None:
    platform = PlatformParams.uniform(1.0, epsilon=1e-3)
    state = OpinionState(np.array([-0.4, 0.4]))
    speed = vector_field(state, pair, platform)
    assert lyapunov_dissipation(state, pair, platform) == pytest.approx(float(speed @ speed), rel=1e-12)


def test_lyapunov_of_a_lone_agent() -> None:
    alone = InfluenceGraph.from_adjacency([[0.0]], Normalization.unit_weight)
    platform = PlatformParams.uniform(1.0, epsilon=0.1)
    assert lyapunov_value(OpinionState(np.array([1.0])), alone, platform) == pytest.approx(-0.45)
    assert lyapunov_value(OpinionState(np.array([0.0])), alone, platform) == 0.0
