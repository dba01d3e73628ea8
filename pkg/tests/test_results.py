import math

import numpy as np
import pytest

from echochamber.constants import EquilibriumKind, MetricKind
from echochamber.errors import InvalidArgument
from echochamber.results import (
    MetricSeries,
    TrialResult,
    TrialResults,
    consensus_indicator,
    consensus_interval,
    extremism,
    polarization,
)


def _result(trial, kind=EquilibriumKind.persistent_disagreement, b=1.0, h=2.0, value=0.5):
    return TrialResult(
        trial=trial, b=b, h=h, kind=kind, polarization=value, extremism=value / 2, settle_time=3.0
    )


def test_polarization_and_extremism() -> None:
    opinions = np.array([[-0.5, -0.3, 0.2, 0.6], [1.0, 1.0, 1.0, 1.0]])
    left, right = np.array([0, 1]), np.array([2, 3])
    np.testing.assert_allclose(polarization(opinions, left, right), [0.8, 0.0])
    np.testing.assert_allclose(extremism(opinions), [0.4, 1.0])
    np.testing.assert_allclose(extremism(opinions, "l2"), [math.sqrt(0.185), 1.0])
    with pytest.raises(InvalidArgument):
        extremism(opinions, "linf")


def test_consensus_interval() -> None:
    low, high = consensus_interval(0.5, 100)
    assert low == pytest.approx(0.4)
    assert high == pytest.approx(0.6)
    assert consensus_interval(1.0, 10) == (1.0, 1.0)
    assert consensus_interval(0.01, 4)[0] == 0.0
    with pytest.raises(InvalidArgument):
        consensus_interval(0.5, 0)


def test_consensus_indicator() -> None:
    assert consensus_indicator(EquilibriumKind.consensus_minus) == 1
    assert consensus_indicator(EquilibriumKind.persistent_disagreement) == 0


def test_metric_series_quantiles_keep_their_order() -> None:
    series = MetricSeries.from_values(MetricKind.polarization, range(101), percentiles=(95, 5, 50))
    assert list(series.quantiles) == [95, 5, 50]
    assert series.quantiles[5] == pytest.approx(5.0)
    assert series.mean == pytest.approx(50.0)
    empty = MetricSeries.from_values(MetricKind.extremism, [], percentiles=(50,))
    assert empty.quantiles == {50: None}
    assert empty.mean is None and empty.sd is None


def test_trial_results_are_order_independent() -> None:
    forward, backward = TrialResults(), TrialResults()
    results = [_result(i, value=0.1 * i) for i in range(5)]
    forward.extend(results)
    backward.extend(reversed(results))
    assert [i.trial for i in backward] == [0, 1, 2, 3, 4]
    assert forward.rows() == backward.rows()


def test_conditional_statistics_skip_failures() -> None:
    results = TrialResults()
    results.extend(
        [
            _result(0),
            _result(1, EquilibriumKind.consensus_plus),
            _result(2, EquilibriumKind.non_convergent),
            TrialResult.failure(3, 1.0, 2.0),
        ]
    )
    assert len(results) == 4
    assert results.failed == 1
    assert results.success_ratio == pytest.approx(0.75)
    assert [i.trial for i in results.converged(1.0, 2.0)] == [0, 1]
    assert results.nonconverged(1.0, 2.0) == 1
    assert [i.trial for i in results.persistent(1.0, 2.0)] == [0]
    assert [i.trial for i in results.consensus(1.0, 2.0)] == [1]
    indicator = results.series(MetricKind.consensus_indicator, results.converged(1.0, 2.0))
    assert indicator.values.tolist() == [0.0, 1.0]


def test_cells_are_kept_apart() -> None:
    results = TrialResults()
    results.add_result(_result(0, b=1.0))
    results.add_result(_result(0, b=2.0))
    assert results.cells() == [(1.0, 2.0), (2.0, 2.0)]
    assert results.get(3.0, 2.0) == []
    assert TrialResults().success_ratio == 1.0


def test_trial_row() -> None:
    row = TrialResult.failure(7, 0.5, 1.0).to_row()
    assert row["kind"] == "NonConvergent"
    assert row["failed"] and not row["converged"]
    assert row["polarization"] is None
