import numpy as np
import pytest

from echochamber.constants import EquilibriumKind, Normalization
from echochamber.dynamics import OpinionState, PlatformParams
from echochamber.errors import InvalidArgument
from echochamber.graph import InfluenceGraph
from echochamber.simulation import SimulationSettings, integrate_ensemble, simulate


def test_settings_validate() -> None:
    with pytest.raises(InvalidArgument):
        SimulationSettings(step=0.0)
    with pytest.raises(InvalidArgument):
        SimulationSettings(step=1.0, horizon=0.5)
    with pytest.raises(InvalidArgument):
        SimulationSettings(sample_every=-1.0)
    settings = SimulationSettings.from_json({"step": 0.01, "horizon": 5.0, "unknown": 1})
    assert settings.horizon == 5.0
    assert settings.to_json()["step"] == 0.01


def test_chunking() -> None:
    settings = SimulationSettings(step=1e-3, horizon=10.0, window=1.0, sample_every=0.01)
    every, per_window, windows = settings.chunking(1e-3)
    assert every == 10
    assert per_window == 1000
    assert windows == 10


def test_simulate_stops_once_settled(pair, platform, fast_settings) -> None:
    trajectory, report = simulate(OpinionState(np.array([-0.4, 0.4])), pair, platform, fast_settings)
    assert report.kind is EquilibriumKind.persistent_disagreement
    assert trajectory.horizon < fast_settings.horizon
    np.testing.assert_allclose(report.limit.opinions, [-1 / 3, 1 / 3], atol=1e-5)


def test_simulate_same_sign_reaches_consensus(pair, platform, fast_settings) -> None:
    _, report = simulate(OpinionState(np.array([0.2, 0.9])), pair, platform, fast_settings)
    assert report.kind is EquilibriumKind.consensus_plus
    _, mirrored = simulate(OpinionState(np.array([-0.2, -0.9])), pair, platform, fast_settings)
    assert mirrored.kind is EquilibriumKind.consensus_minus


def test_simulate_runs_to_the_horizon_when_asked(pair, platform) -> None:
    settings = SimulationSettings(step=1e-3, horizon=2.0, sample_every=0.1, stop_when_converged=False)
    trajectory, report = simulate(OpinionState(np.array([-0.4, 0.4])), pair, platform, settings)
    assert trajectory.horizon == pytest.approx(2.0)
    assert report.kind is EquilibriumKind.non_convergent


def test_simulate_slanted_consensus(pair, fast_settings) -> None:
    platform = PlatformParams.uniform(1.0, epsilon=1e-2, alpha=0.5)
    _, report = simulate(OpinionState(np.array([0.3, 0.6])), pair, platform, fast_settings)
    assert report.kind is EquilibriumKind.consensus_plus
    np.testing.assert_allclose(report.limit.opinions, 0.5, atol=1e-5)


def test_ensemble_members_do_not_depend_on_the_batch(pair, fast_settings) -> None:
    x0s = np.array([[-0.4, 0.4], [0.2, 0.9], [-0.1, 0.6]])
    together = integrate_ensemble(x0s, pair.laplacian, 1.0, 1e-2, settings=fast_settings)
    alone = integrate_ensemble(x0s[2:], pair.laplacian, 1.0, 1e-2, settings=fast_settings)
    np.testing.assert_allclose(together.final[2], alone.final[0], rtol=0, atol=1e-14)
    assert together.settle_times[2] == alone.settle_times[0]
    assert together.kinds[:2] == (EquilibriumKind.persistent_disagreement, EquilibriumKind.consensus_plus)
    assert together.converged.all()
    assert not together.failed.any()


def test_ensemble_agrees_with_simulate(pair, platform, fast_settings) -> None:
    x0 = np.array([-0.4, 0.4])
    _, report = simulate(OpinionState(x0), pair, platform, fast_settings)
    result = integrate_ensemble(x0[None, :], pair.laplacian, 1.0, 1e-2, settings=fast_settings)
    assert result.kinds[0] is report.kind
    np.testing.assert_allclose(result.final[0], report.limit.opinions, atol=1e-5)


def test_ensemble_stacked_laplacians_and_observer(pair, fast_settings) -> None:
    laplacians = np.stack([pair.laplacian, 2 * pair.laplacian])
    x0s = np.array([[-0.4, 0.4], [-0.4, 0.4]])
    result = integrate_ensemble(
        x0s, laplacians, 1.0, 1e-2, settings=fast_settings, observer=lambda x: x[:, 1] - x[:, 0]
    )
    assert result.series.shape == (len(result.times), 2)
    assert result.series[0].tolist() == [0.8, 0.8]
    # stronger coupling pulls the pair closer: 2b/(2a+b)
    assert result.final[0, 1] - result.final[0, 0] == pytest.approx(2 / 3, abs=1e-5)
    assert result.final[1, 1] - result.final[1, 0] == pytest.approx(2 / 5, abs=1e-5)


def test_ensemble_without_early_stop(pair) -> None:
    settings = SimulationSettings(step=1e-3, horizon=30.0, tol=1e-6, sample_every=0.1, stop_when_converged=False)
    result = integrate_ensemble(np.array([[-0.4, 0.4], [0.3, 0.5]]), pair.laplacian, 1.0, 1e-2, settings=settings)
    assert result.converged.all()
    np.testing.assert_allclose(result.settle_times, 30.0)


def test_ensemble_rejects_bad_shapes(pair) -> None:
    with pytest.raises(InvalidArgument):
        integrate_ensemble(np.zeros(2), pair.laplacian, 1.0, 1e-2)
    with pytest.raises(InvalidArgument):
        integrate_ensemble(np.zeros((2, 3)), pair.laplacian, 1.0, 1e-2)
    with pytest.raises(InvalidArgument):
        integrate_ensemble(np.zeros((2, 2)), pair.laplacian, np.ones(3), 1e-2)


def test_ensemble_settles_when_simulate_does(rng) -> None:
    settings = SimulationSettings(step=0.01, horizon=60.0, tol=1e-3, window=2.0, sample_every=0.05)
    for _ in range(15):
        n = int(rng.integers(3, 7))
        adjacency = (rng.random((n, n)) < 0.4).astype(float)
        np.fill_diagonal(adjacency, 0.0)
        graph = InfluenceGraph.from_adjacency(adjacency, Normalization.unit_weight, a=float(rng.uniform(0.5, 2.0)))
        b = float(rng.uniform(0.2, 1.0))
        x0 = rng.uniform(-1.0, 1.0, n)
        trajectory, report = simulate(OpinionState(x0), graph, PlatformParams.uniform(b, epsilon=0.1), settings)
        result = integrate_ensemble(x0[None, :], graph.laplacian, b, 0.1, settings=settings)
        assert result.kinds[0] is report.kind
        if report.converged:
            assert result.settle_times[0] == pytest.approx(trajectory.horizon)


def test_ensemble_keeps_an_oscillating_cycle_running() -> None:
    cycle = InfluenceGraph.directed_cycle(4)
    settings = SimulationSettings(step=0.01, horizon=60.0, tol=1e-6, window=1.0, sample_every=0.05)
    result = integrate_ensemble(np.array([[-0.5, 1.0, 0.5, -1.0]]), cycle.laplacian, 0.6, 0.1, settings=settings)
    assert result.kinds == (EquilibriumKind.non_convergent,)
    assert np.isnan(result.settle_times[0])
