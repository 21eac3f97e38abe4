import sys
from pathlib import Path

sys.path.append(
    str(Path(__file__).resolve().parent.parent)
)

import math  # NOQA
import unittest  # NOQA

import numpy as np  # NOQA

from matching_chains import metrics  # NOQA
from matching_chains.core import (  # NOQA
    AssortativeState,
    ChainKind,
    Method,
    SignedQueueState,
    StationaryDistribution,
    ThresholdConfig,
    WelfareParams,
)
from matching_chains.exceptions import (  # NOQA
    MissingUtilityError,
    PreconditionError,
)
from matching_chains.montecarlo import simulate  # NOQA
from matching_chains.solve import exact_stationary  # NOQA

FLAT_THREE_WAY = {"HHH": 1.0, "HHL": 1.0, "HLL": 1.0, "LLL": 1.0}


class TestQueueStats(unittest.TestCase):

    def test_empty_market(self):
        dist = StationaryDistribution(
            [1.0], [AssortativeState((0, 0, 0))], Method.DIRECT,
            kind=ChainKind.ASSORTATIVE,
        )
        stats = metrics.expected_queue_stats(dist)
        self.assertEqual(stats.mean_high, (0.0, 0.0, 0.0))
        self.assertEqual(stats.mean_low, (0.0, 0.0, 0.0))
        self.assertEqual(stats.mean_total_waiting, 0.0)

    def test_twoway_uniform(self):
        _, dist = exact_stationary(
            ChainKind.TWOWAY, 0.4, ThresholdConfig(k_bar=1),
            method=Method.CLOSED_FORM,
        )
        stats = metrics.expected_queue_stats(dist)
        self.assertAlmostEqual(stats.mean_high[0] + stats.mean_low[0], 2 / 3)
        # one H and one l wait per unit of |k|
        self.assertAlmostEqual(stats.mean_total_waiting, 4 / 3)

    def test_disassortative_closed_form(self):
        _, dist = exact_stationary(
            ChainKind.DISASSORTATIVE, 0.5,
            ThresholdConfig(k_high=1, k_low=1), method=Method.CLOSED_FORM,
        )
        stats = metrics.expected_queue_stats(dist)
        self.assertAlmostEqual(stats.mean_total_waiting, 1.0, places=14)
        self.assertAlmostEqual(stats.mean_high[0], 1 / 6, places=14)
        self.assertAlmostEqual(stats.mean_low[2], 1 / 6, places=14)

    def test_lumped_and_full_laws_agree(self):
        thresholds = ThresholdConfig(k_bar=3)
        _, full = exact_stationary(ChainKind.ASSORTATIVE, 0.3, thresholds)
        _, lumped = exact_stationary(
            ChainKind.ASSORTATIVE, 0.3, thresholds, lumped=True
        )
        full_stats = metrics.expected_queue_stats(full)
        lumped_stats = metrics.expected_queue_stats(lumped)
        np.testing.assert_allclose(
            full_stats.mean_high, lumped_stats.mean_high, atol=1e-12
        )
        self.assertAlmostEqual(
            full_stats.mean_total_waiting, lumped_stats.mean_total_waiting,
            delta=1e-12,
        )
        # symmetric law, identical populations
        self.assertAlmostEqual(
            full_stats.mean_high[0], full_stats.mean_high[2], delta=1e-12
        )

    def test_misaligned_states(self):
        dist = StationaryDistribution(
            [0.5, 0.5], [SignedQueueState(0), SignedQueueState(1)],
            Method.DIRECT,
        )
        with self.assertRaises(ValueError):
            metrics.expected_queue_stats(dist, [SignedQueueState(0)])

    def test_signed_law_needs_its_kind(self):
        dist = StationaryDistribution(
            [0.5, 0.5], [SignedQueueState(0), SignedQueueState(1)],
            Method.DIRECT,
        )
        with self.assertRaises(PreconditionError):
            metrics.expected_queue_stats(dist)
        # an assortative state names its own kind
        dist = StationaryDistribution(
            [1.0], [AssortativeState((1, 0, 0))], Method.DIRECT,
        )
        stats = metrics.expected_queue_stats(dist)
        self.assertEqual(stats.mean_low, (0.0, 1.0, 1.0))


class TestTeamRates(unittest.TestCase):

    def test_one_team_per_period(self):
        for kind, thresholds in (
                (ChainKind.ASSORTATIVE, ThresholdConfig(k_bar=2)),
                (ChainKind.DISASSORTATIVE, ThresholdConfig(k_high=2, k_low=3)),
                (ChainKind.TWOWAY, ThresholdConfig(k_bar=2))):
            chain, dist = exact_stationary(kind, 0.35, thresholds)
            rates = metrics.team_rates(chain, dist)
            self.assertAlmostEqual(math.fsum(rates.values()), 1.0, delta=1e-12)
            self.assertTrue(all(rate >= 0.0 for rate in rates.values()))

    def test_lumped_rates_match_full_rates(self):
        thresholds = ThresholdConfig(k_bar=2)
        full_chain, full = exact_stationary(
            ChainKind.ASSORTATIVE, 0.6, thresholds
        )
        lumped_chain, lumped = exact_stationary(
            ChainKind.ASSORTATIVE, 0.6, thresholds, lumped=True
        )
        full_rates = metrics.team_rates(full_chain, full)
        lumped_rates = metrics.team_rates(lumped_chain, lumped)
        self.assertEqual(set(full_rates), set(lumped_rates))
        for composition, rate in full_rates.items():
            self.assertAlmostEqual(rate, lumped_rates[composition], delta=1e-12)

    def test_rates_match_simulation(self):
        thresholds = ThresholdConfig(k_bar=2)
        chain, dist = exact_stationary(ChainKind.ASSORTATIVE, 0.5, thresholds)
        analytic = metrics.team_rates(chain, dist)
        samples = {composition: [] for composition in analytic}
        for seed in range(20):
            report = simulate(
                ChainKind.ASSORTATIVE, 0.5, thresholds, 50_000, seed=seed
            )
            rates = report.team_rates()
            for composition in samples:
                samples[composition].append(rates.get(composition, 0.0))
        for composition, values in samples.items():
            values = np.asarray(values)
            error = values.std(ddof=1) / math.sqrt(len(values))
            self.assertLessEqual(
                abs(values.mean() - analytic[composition]),
                max(3.0 * error, 1e-12),
                msg=composition,
            )

    def test_long_run_rates_match_simulation(self):
        thresholds = ThresholdConfig(k_high=1, k_low=1)
        chain, dist = exact_stationary(
            ChainKind.DISASSORTATIVE, 0.5, thresholds
        )
        analytic = metrics.team_rates(chain, dist)
        report = simulate(
            ChainKind.DISASSORTATIVE, 0.5, thresholds, 1_000_000, seed=3
        )
        recorded = report.steps - report.burn_in
        for composition, rate in analytic.items():
            simulated = report.team_rates().get(composition, 0.0)
            # binomial bound on the per-period count, inflated for the
            # correlation between consecutive periods
            error = 2.0 * math.sqrt(2.0 * rate / recorded)
            self.assertLessEqual(
                abs(simulated - rate), 3.0 * error, msg=composition
            )


class TestWelfare(unittest.TestCase):

    def test_single_composition(self):
        dist = StationaryDistribution(
            [1.0], [AssortativeState((0, 0, 0))], Method.DIRECT,
            kind=ChainKind.ASSORTATIVE,
        )
        welfare = WelfareParams({"HHH": 3.0}, 0.0)
        self.assertAlmostEqual(
            metrics.welfare_rate(dist, welfare, {"HHH": 0.4}), 1.2,
            delta=1e-15,
        )

    def test_empty_market_without_teams(self):
        dist = StationaryDistribution(
            [1.0], [SignedQueueState(0)], Method.DIRECT,
            kind=ChainKind.DISASSORTATIVE,
        )
        welfare = WelfareParams(FLAT_THREE_WAY, 0.5)
        self.assertEqual(metrics.welfare_rate(dist, welfare, {}), 0.0)

    def test_missing_utility(self):
        dist = StationaryDistribution(
            [1.0], [AssortativeState((0, 0, 0))], Method.DIRECT,
        )
        welfare = WelfareParams({"HHH": 3.0}, 0.0)
        with self.assertRaises(MissingUtilityError):
            metrics.welfare_rate(dist, welfare, {"LLL": 0.1})
        # zero-rate compositions need no utility
        metrics.welfare_rate(dist, welfare, {"HHH": 1.0, "LLL": 0.0})

    def test_affine_in_cost(self):
        for kind, thresholds in (
                (ChainKind.TWOWAY, ThresholdConfig(k_bar=3)),
                (ChainKind.ASSORTATIVE, ThresholdConfig(k_bar=2)),
                (ChainKind.DISASSORTATIVE, ThresholdConfig(k_high=2, k_low=2))):
            chain, dist = exact_stationary(kind, 0.4, thresholds)
            rates = metrics.team_rates(chain, dist)
            low = WelfareParams.example(kind, waiting_cost=0.1)
            high = low.with_cost(0.6)
            slope = (
                metrics.welfare_rate(dist, high, rates)
                - metrics.welfare_rate(dist, low, rates)
            ) / 0.5
            waiting = metrics.expected_queue_stats(dist).mean_total_waiting
            self.assertAlmostEqual(slope, -waiting, delta=1e-12)


class TestThresholdSweep(unittest.TestCase):

    def test_single_row_is_flagged(self):
        rows = metrics.threshold_sweep(
            ChainKind.ASSORTATIVE, 0.5, [ThresholdConfig(k_bar=2)],
            WelfareParams.example(ChainKind.ASSORTATIVE),
        )
        self.assertEqual(len(rows), 1)
        self.assertTrue(rows[0].is_best)

    def test_flat_utilities_tie_to_smallest_threshold(self):
        welfare = WelfareParams(FLAT_THREE_WAY, 0.0)
        settings = [ThresholdConfig(k_bar=k) for k in (3, 1, 2)]
        rows = metrics.threshold_sweep(
            ChainKind.ASSORTATIVE, 0.4, settings, welfare
        )
        for row in rows:
            self.assertAlmostEqual(row.welfare_rate, 1.0, delta=1e-12)
        self.assertEqual(
            [row.is_best for row in rows], [False, True, False]
        )

    def test_rows_match_individual_calls(self):
        welfare = WelfareParams.example(ChainKind.DISASSORTATIVE, 0.2)
        settings = [
            ThresholdConfig(k_high=high, k_low=low)
            for high in (0, 1, 2) for low in (0, 2)
        ]
        rows = metrics.threshold_sweep(
            ChainKind.DISASSORTATIVE, 0.3, settings, welfare
        )
        self.assertEqual(sum(row.is_best for row in rows), 1)
        for row, setting in zip(rows, settings):
            self.assertEqual(row.thresholds, setting)
            chain, dist = exact_stationary(
                ChainKind.DISASSORTATIVE, 0.3, setting
            )
            expected = metrics.welfare_rate(
                dist, welfare, metrics.team_rates(chain, dist)
            )
            self.assertAlmostEqual(row.welfare_rate, expected, delta=1e-12)
        best = max(rows, key=lambda row: row.welfare_rate)
        self.assertTrue(best.is_best)

    def test_empty_sweep(self):
        with self.assertRaises(PreconditionError):
            metrics.threshold_sweep(
                ChainKind.TWOWAY, 0.5, [],
                WelfareParams.example(ChainKind.TWOWAY),
            )


if __name__ == "__main__":
    unittest.main()
