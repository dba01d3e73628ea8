import csv
import math

import numpy as np
import pytest

from echochamber.constants import ClassificationKind, EquilibriumKind
from echochamber.dynamics import OpinionState, integrate
from echochamber.errors import InvalidArgument
from echochamber.simulation import SimulationSettings
from echochamber.twoagentcommands import region_agreement
from echochamber.twoagent import (
    TwoAgentSystem,
    band_crossing,
    classify,
    consensus_possible,
    pd_equilibrium,
    polarization_curve,
    region_grid,
    simulate_region,
    simulate_two_agent,
    trajectory_extrema,
    write_region_csv,
)


def test_pd_equilibrium() -> None:
    mu, polarization = pd_equilibrium(1.0, 1.0)
    assert mu == pytest.approx(1 / 3)
    assert polarization == pytest.approx(2 / 3)
    with pytest.raises(InvalidArgument):
        pd_equilibrium(0.0, 1.0)


def test_consensus_possible_needs_weak_platform() -> None:
    assert consensus_possible(1.0, 0.5)
    assert not consensus_possible(1.0, 1.0)
    assert consensus_possible(1.0, 1.5, bound=2.0)


def test_classify_first_condition() -> None:
    result = classify(TwoAgentSystem(a=1.0, b=1.0, x0=(-0.1, 0.2)))
    assert result.kind is ClassificationKind.pd_c1
    assert result.predicted_equilibrium == pytest.approx((-1 / 3, 1 / 3))
    assert result.polarization == pytest.approx(2 / 3)
    assert result.conditions["lhs"] == pytest.approx(-1.1)


def test_classify_second_condition_on_balanced_start() -> None:
    result = classify(TwoAgentSystem(a=1.0, b=1.0, x0=(-0.4, 0.4)))
    assert result.kind is ClassificationKind.pd_c2
    assert result.conditions["log_c2_rhs"] == -math.inf
    assert result.predicted_equilibrium == pytest.approx((-1 / 3, 1 / 3))


def test_classify_same_sign() -> None:
    result = classify(TwoAgentSystem(a=1.0, b=1.0, x0=(-0.2, -0.7)))
    assert result.kind is ClassificationKind.co_same_sign
    assert result.predicted_equilibrium == (-1.0, -1.0)
    assert result.to_json()["kind"] == "CO_SameSign"


def test_classify_band_crossing_consensus() -> None:
    result = classify(TwoAgentSystem(a=1.0, b=0.5, x0=(-0.1, 2.5)))
    assert result.kind is ClassificationKind.co_band
    assert result.predicted_equilibrium == (1.0, 1.0)
    assert result.sign_source == "extrema"

    mirrored = classify(TwoAgentSystem(a=1.0, b=0.5, x0=(0.1, -2.5)))
    assert mirrored.kind is ClassificationKind.co_band
    assert mirrored.predicted_equilibrium == (-1.0, -1.0)


def test_classify_at_the_equilibrium_is_boundary() -> None:
    result = classify(TwoAgentSystem(a=1.0, b=2.0, x0=(-0.5, 0.5)))
    assert result.kind is ClassificationKind.boundary
    assert result.predicted_equilibrium is None


def test_classify_rejects_axis_points() -> None:
    with pytest.raises(InvalidArgument):
        classify(TwoAgentSystem(a=1.0, b=1.0, x0=(0.0, 0.5)))
    with pytest.raises(InvalidArgument):
        TwoAgentSystem(a=1.0, b=-1.0, x0=(0.1, 0.5))


def test_extrema_of_a_crossing_trajectory() -> None:
    extrema = trajectory_extrema(1.0, 0.5, 0.1, 2.5)
    assert extrema.case == "3.2"
    assert extrema.t_star_x1 == pytest.approx(0.7612, abs=1e-3)
    assert extrema.t_star_x2 is None
    assert extrema.max_x1 == pytest.approx(0.456, abs=1e-3)
    assert not extrema.stays_in_quadrant


def test_extrema_of_a_balanced_trajectory() -> None:
    extrema = trajectory_extrema(1.0, 1.0, 0.4, 0.4)
    assert extrema.case == "degenerate"
    assert extrema.max_x1 == pytest.approx(-1 / 3)
    assert extrema.min_x2 == pytest.approx(1 / 3)
    assert extrema.stays_in_quadrant


def test_closed_form_matches_integration(pair, platform) -> None:
    system = TwoAgentSystem(a=1.0, b=1.0, x0=(-0.4, 0.7))
    trajectory = integrate(system.initial_state(), pair, platform, 2.0, 1e-3)
    x1, x2 = system.quadrant().at(trajectory.horizon)
    np.testing.assert_allclose(trajectory.final.opinions, [x1, x2], atol=1e-9)


def test_mirrored_quadrant_is_negated() -> None:
    left = TwoAgentSystem(a=1.0, b=1.0, x0=(-0.4, 0.6)).quadrant()
    right = TwoAgentSystem(a=1.0, b=1.0, x0=(0.4, -0.6)).quadrant()
    assert right.mirrored
    np.testing.assert_allclose(right.at(0.7), -np.array(left.at(0.7)))
    with pytest.raises(InvalidArgument):
        TwoAgentSystem(a=1.0, b=1.0, x0=(0.4, 0.6)).quadrant()


def test_polarization_curve_follows_the_quadrant_solution() -> None:
    quadrant = TwoAgentSystem(a=1.0, b=1.0, x0=(-0.3, 0.5)).quadrant()
    t = np.linspace(0.0, 3.0, 7)
    x1, x2 = quadrant.at(t)
    np.testing.assert_allclose(polarization_curve(1.0, 1.0, 0.8, t), x2 - x1, rtol=1e-12)
    assert polarization_curve(1.0, 1.0, 0.8, 50.0) == pytest.approx(2 / 3)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_band_crossing_coefficients(b) -> None:
    crossing = band_crossing(b, 1e-5, 1.5 * b)
    assert crossing.crossing_guaranteed
    assert crossing.c_plus > 0
    assert crossing.c_minus_floor == pytest.approx(b * b / (1 + b), rel=0.05)
    assert crossing.c_minus >= crossing.c_minus_floor
    np.testing.assert_allclose(crossing.at(0.0), [-1e-5, 1.5 * b], atol=1e-12)
    assert crossing.residual(0.0) < 1e-6


def test_band_crossing_entry_condition() -> None:
    with pytest.raises(InvalidArgument):
        band_crossing(1.0, 1e-5, 0.5)
    assert band_crossing(1.0, 1e-5, 1.0).to_json()["x2_0"] == 1.0


def test_region_grid_counts(tmp_path) -> None:
    grid = region_grid(1.0, 1.0, -1.0, 1.0, 5)
    counts = grid.counts()
    assert sum(counts.values()) == 25
    assert counts[ClassificationKind.boundary] == 9
    assert counts[ClassificationKind.co_same_sign] == 8
    assert counts[ClassificationKind.pd_c1] + counts[ClassificationKind.pd_c2] == 8
    assert counts[ClassificationKind.co_band] == 0

    path = write_region_csv(grid, tmp_path / "region.csv")
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 25
    assert rows[0] == {"x1_0": "-1.0", "x2_0": "-1.0", "kind": "CO_SameSign"}


def test_region_grid_rejects_bad_lattices() -> None:
    with pytest.raises(InvalidArgument):
        region_grid(1.0, 1.0, -1.0, 1.0, 1)
    with pytest.raises(InvalidArgument):
        region_grid(1.0, 1.0, 1.0, -1.0, 5)


def test_simulated_region_agrees_with_classification() -> None:
    grid = region_grid(1.0, 1.0, -1.0, 1.0, 5)
    settings = SimulationSettings(step=1e-3, horizon=30.0, tol=1e-6, window=1.0)
    simulated = simulate_region(grid, epsilon=1e-2, settings=settings)
    for (x1, x2, kind), outcome in zip(grid.points(), simulated.ravel()):
        if kind.is_pd:
            assert outcome is EquilibriumKind.persistent_disagreement
        elif kind is ClassificationKind.co_same_sign:
            expected = EquilibriumKind.consensus_plus if x1 > 0 else EquilibriumKind.consensus_minus
            assert outcome is expected


def test_simulate_band_crossing_system(fast_settings) -> None:
    system = TwoAgentSystem(a=1.0, b=0.5, x0=(-0.1, 2.5), epsilon=1e-2)
    trajectory, report = simulate_two_agent(system, fast_settings)
    assert report.kind is EquilibriumKind.consensus_plus
    assert trajectory.states[:, 0].max() > 0
    assert isinstance(trajectory[0], OpinionState)


@pytest.mark.parametrize("a, b, x", [(1.0, 0.5, 0.4), (1.0, 2.0, 1.3), (0.3, 1.0, 2.0), (2.0, 0.7, 0.05)])
def test_balanced_starts_persist(a, b, x) -> None:
    result = classify(TwoAgentSystem(a=a, b=b, x0=(-x, x)))
    assert result.kind is ClassificationKind.pd_c2
    mu, _ = pd_equilibrium(a, b)
    assert result.predicted_equilibrium == pytest.approx((-mu, mu))


@pytest.mark.parametrize("x0", [(-0.1, 2.5), (0.1, -2.5), (-2.5, 0.1), (-0.3, 1.5)])
def test_band_crossing_sign_matches_simulation(x0) -> None:
    system = TwoAgentSystem(a=1.0, b=0.5, x0=x0, epsilon=1e-2)
    result = classify(system)
    assert result.kind is ClassificationKind.co_band
    settings = SimulationSettings(step=1e-3, horizon=80.0, tol=1e-6, window=1.0, sample_every=0.01)
    _, report = simulate_two_agent(system, settings)
    plus = result.predicted_equilibrium[0] > 0
    expected = EquilibriumKind.consensus_plus if plus else EquilibriumKind.consensus_minus
    assert report.kind is expected


def test_extrema_match_dense_sampling(rng) -> None:
    t = np.linspace(0.0, 50.0, 100_001)
    for _ in range(50):
        a, b = rng.uniform(0.5, 3.0, 2)
        u, v = rng.uniform(0.05, 3.0, 2)
        extrema = trajectory_extrema(a, b, u, v)
        x1, x2 = TwoAgentSystem(a=a, b=b, x0=(-u, v)).quadrant().at(t)
        assert x1.max() <= extrema.max_x1 + 1e-9
        assert extrema.max_x1 - x1.max() <= 1e-4
        assert x2.min() >= extrema.min_x2 - 1e-9
        assert x2.min() - extrema.min_x2 <= 1e-4


def test_disagreement_means_the_quadrant_is_kept(rng) -> None:
    checked = 0
    for _ in range(500):
        a, b = rng.uniform(0.2, 3.0, 2)
        u, v = rng.uniform(0.01, 3.0, 2)
        result = classify(TwoAgentSystem(a=a, b=b, x0=(-u, v)))
        if result.kind is ClassificationKind.boundary:
            continue
        checked += 1
        assert result.kind.is_pd == trajectory_extrema(a, b, u, v).stays_in_quadrant, (a, b, u, v)
    assert checked > 450


def test_classification_depends_on_the_ratio_only(rng) -> None:
    for _ in range(200):
        a, b = rng.uniform(0.2, 3.0, 2)
        x0 = tuple(rng.uniform(-3.0, 3.0, 2))
        base = classify(TwoAgentSystem(a=a, b=b, x0=x0)).kind
        if base is ClassificationKind.boundary:
            continue
        for k in (0.5, 2.0, 10.0):
            assert classify(TwoAgentSystem(a=k * a, b=k * b, x0=x0)).kind is base


def _near_a_locus(a: float, b: float, x1: float, x2: float, kind: ClassificationKind, radius: float = 0.05) -> bool:
    for dx1 in (-radius, 0.0, radius):
        for dx2 in (-radius, 0.0, radius):
            y1, y2 = x1 + dx1, x2 + dx2
            if y1 * y2 <= 0 or classify(TwoAgentSystem(a=a, b=b, x0=(y1, y2))).kind is not kind:
                return True
    return False


@pytest.mark.slow
@pytest.mark.parametrize("ratio", [0.5, 1.0])
def test_region_agrees_with_simulation(ratio) -> None:
    grid = region_grid(1.0, ratio, -3.0, 3.0, 101)
    settings = SimulationSettings(step=1e-4, horizon=100.0, tol=1e-6, window=1.0, sample_every=0.05)
    simulated = simulate_region(grid, epsilon=1e-3, settings=settings)
    agreement = region_agreement(grid.kinds, simulated)
    assert agreement["ratio"] >= 0.99
    for (x1, x2, kind), outcome in zip(grid.points(), simulated.ravel()):
        if kind is ClassificationKind.boundary:
            continue
        matched = (kind.is_pd and outcome.converged and not outcome.is_consensus) or (
            kind.is_co and outcome.is_consensus
        )
        assert matched or _near_a_locus(1.0, ratio, x1, x2, kind), (x1, x2, kind, outcome)
