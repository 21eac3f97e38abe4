import sys
from pathlib import Path

sys.path.append(
    str(Path(__file__).resolve().parent.parent)
)

import itertools  # NOQA
import unittest  # NOQA

from matching_chains import policy  # NOQA
from matching_chains.chain import (  # NOQA
    POPULATION_PERMUTATIONS,
    enumerate_assortative_states,
)
from matching_chains.core import (  # NOQA
    ArrivalPair,
    ArrivalTriplet,
    AssortativeState,
    ChainKind,
    SignedQueueState,
    ThresholdConfig,
    enumerate_arrival_pairs,
    enumerate_arrival_triplets,
)
from matching_chains.exceptions import PreconditionError  # NOQA


def triplet(text):
    return ArrivalTriplet(tuple(text))


def compositions(report):
    return sorted(team.composition for team in report.teams)


class TestTeams(unittest.TestCase):

    def test_team_composition(self):
        team = policy.Team(("L", "H", "H"), ("queue", "arrival", "queue"))
        self.assertEqual(team.composition, "HHL")
        self.assertEqual(team.high_count, 2)
        pair = policy.Team(("L", "H"), ("arrival", "arrival"), forced=True)
        self.assertEqual(pair.composition, "Lh")

    def test_team_needs_one_source_per_member(self):
        with self.assertRaises(ValueError):
            policy.Team(("H", "H"), ("queue",))
        with self.assertRaises(ValueError):
            policy.Team(("H",), ("queue",))

    def test_team_report(self):
        report = policy.TeamReport((
            policy.Team(("H", "H", "H"), ("arrival",) * 3),
            policy.Team(("H", "H", "H"), ("queue",) * 3),
            policy.Team(("H", "L", "L"), ("queue",) * 3, forced=True),
        ))
        self.assertEqual(len(report), 3)
        self.assertEqual(report.forced, (False, False, True))
        self.assertEqual(
            dict(report.count_by_composition()), {"HHH": 2, "HLL": 1}
        )


class TestAssortativeStep(unittest.TestCase):

    def test_all_high_arrival_matches_at_once(self):
        state, report = policy.assortative_step(
            AssortativeState((0, 0, 0)), triplet("HHH"), 2
        )
        self.assertEqual(state, AssortativeState((0, 0, 0)))
        self.assertEqual(compositions(report), ["HHH"])
        self.assertEqual(
            report.teams[0].sources, (policy.Source.ARRIVAL,) * 3
        )

    def test_highs_wait(self):
        state, report = policy.assortative_step(
            AssortativeState((0, 0, 0)), triplet("HHL"), 2
        )
        self.assertEqual(state, AssortativeState((1, 1, 0)))
        self.assertEqual(len(report), 0)

    def test_waiting_highs_complete_a_team(self):
        state, report = policy.assortative_step(
            AssortativeState((1, 1, 0)), triplet("LLH"), 2
        )
        self.assertEqual(state, AssortativeState((0, 0, 0)))
        self.assertEqual(compositions(report), ["HHH", "LLL"])
        high_team = report.teams[0]
        self.assertEqual(
            high_team.sources,
            (policy.Source.QUEUE, policy.Source.QUEUE, policy.Source.ARRIVAL),
        )

    def test_forced_team_at_threshold(self):
        state, report = policy.assortative_step(
            AssortativeState((2, 0, 0)), triplet("HLL"), 2
        )
        self.assertEqual(state, AssortativeState((2, 0, 0)))
        self.assertEqual(compositions(report), ["HLL"])
        team = report.teams[0]
        self.assertTrue(team.forced)
        self.assertEqual(team.sources, (policy.Source.QUEUE,) * 3)

    def test_forced_team_takes_every_available_high(self):
        state, report = policy.assortative_step(
            AssortativeState((2, 1, 0)), triplet("HLL"), 2
        )
        self.assertEqual(state, AssortativeState((2, 0, 0)))
        self.assertEqual(compositions(report), ["HHL"])
        self.assertTrue(report.teams[0].forced)

    def test_simultaneous_excess_forms_one_team(self):
        state, report = policy.assortative_step(
            AssortativeState((2, 2, 0)), triplet("HHL"), 2
        )
        self.assertEqual(state, AssortativeState((2, 2, 0)))
        self.assertEqual(compositions(report), ["HHL"])
        self.assertEqual(report.forced, (True,))

    def test_forced_team_with_two_highs(self):
        state, report = policy.assortative_step(
            AssortativeState((3, 0, 0)), triplet("HLH"), 3
        )
        self.assertEqual(state, AssortativeState((3, 0, 0)))
        self.assertEqual(compositions(report), ["HHL"])
        self.assertEqual(report.teams[0].high_count, 2)
        self.assertTrue(report.teams[0].forced)

    def test_implied_low_team(self):
        state, report = policy.assortative_step(
            AssortativeState((1, 0, 0)), triplet("LLL"), 2
        )
        self.assertEqual(state, AssortativeState((1, 0, 0)))
        self.assertEqual(compositions(report), ["LLL"])
        self.assertEqual(
            report.teams[0].sources,
            (policy.Source.ARRIVAL, policy.Source.QUEUE, policy.Source.QUEUE),
        )

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            policy.assortative_step(
                AssortativeState((3, 0, 0)), triplet("HHH"), 2
            )
        with self.assertRaises(PreconditionError):
            policy.assortative_step(
                AssortativeState((0, 0, 0)), triplet("HHH"), 0
            )

    def test_results_stay_on_the_cube_faces(self):
        for k_bar in (1, 2, 3):
            for state in enumerate_assortative_states(k_bar):
                for arrival in enumerate_arrival_triplets():
                    following, report = policy.assortative_step(
                        state, arrival, k_bar
                    )
                    self.assertEqual(min(following.a), 0)
                    self.assertLessEqual(max(following.a), k_bar)
                    # every population holds max(a) agents
                    self.assertEqual(
                        len(report), max(state.a) + 1 - max(following.a)
                    )
                    self.assertLessEqual(sum(report.forced), 1)

    def test_permutation_equivariance(self):
        k_bar = 3
        for state in enumerate_assortative_states(k_bar):
            for arrival in enumerate_arrival_triplets():
                following, report = policy.assortative_step(
                    state, arrival, k_bar
                )
                for sigma in POPULATION_PERMUTATIONS:
                    permuted, permuted_report = policy.assortative_step(
                        state.permute(sigma), arrival.permute(sigma), k_bar
                    )
                    self.assertEqual(permuted, following.permute(sigma))
                    self.assertEqual(
                        permuted_report.count_by_composition(),
                        report.count_by_composition(),
                    )


class TestDisassortativeStep(unittest.TestCase):

    def test_increments(self):
        k_high, k_low = 2, 3
        for value in range(-k_low, k_high + 1):
            k = SignedQueueState(value)
            for arrival in enumerate_arrival_triplets():
                n = arrival.high_count
                if n == 3:
                    expected = min(value + 1, k_high)
                elif n == 0:
                    expected = max(value - 1, -k_low)
                elif n == 2:
                    expected = value + 1 if value < 0 else value
                else:
                    expected = value - 1 if value > 0 else value
                self.assertEqual(
                    policy.disassortative_step(k, arrival, k_high, k_low),
                    SignedQueueState(expected),
                    msg="k={0}, arrival={1}".format(value, arrival),
                )

    def test_uniform_arrival_splits_a_waiting_triplet(self):
        state, report = policy.disassortative_transition(
            SignedQueueState(1), triplet("LLL"), 1, 1
        )
        self.assertEqual(state, SignedQueueState(0))
        self.assertEqual(compositions(report), ["HHL", "HLL"])
        self.assertFalse(any(report.forced))

    def test_mixed_arrival_with_two_minority_members(self):
        state, report = policy.disassortative_transition(
            SignedQueueState(1), triplet("HLL"), 1, 1
        )
        self.assertEqual(state, SignedQueueState(0))
        self.assertEqual(compositions(report), ["HHL", "HHL"])
        state, report = policy.disassortative_transition(
            SignedQueueState(-2), triplet("HLH"), 1, 2
        )
        self.assertEqual(state, SignedQueueState(-1))
        self.assertEqual(compositions(report), ["HLL", "HLL"])

    def test_mixed_arrival_alone(self):
        state, report = policy.disassortative_transition(
            SignedQueueState(1), triplet("HHL"), 1, 1
        )
        self.assertEqual(state, SignedQueueState(1))
        self.assertEqual(compositions(report), ["HHL"])
        self.assertEqual(
            report.teams[0].sources, (policy.Source.ARRIVAL,) * 3
        )

    def test_forced_uniform_team(self):
        state, report = policy.disassortative_transition(
            SignedQueueState(1), triplet("HHH"), 1, 1
        )
        self.assertEqual(state, SignedQueueState(1))
        self.assertEqual(compositions(report), ["HHH"])
        self.assertTrue(report.teams[0].forced)
        self.assertEqual(report.teams[0].sources, (policy.Source.QUEUE,) * 3)
        state, report = policy.disassortative_transition(
            SignedQueueState(0), triplet("LLL"), 0, 0
        )
        self.assertEqual(state, SignedQueueState(0))
        self.assertEqual(compositions(report), ["LLL"])
        self.assertEqual(
            report.teams[0].sources, (policy.Source.ARRIVAL,) * 3
        )

    def test_out_of_range_state(self):
        with self.assertRaises(PreconditionError):
            policy.disassortative_step(
                SignedQueueState(2), triplet("HHH"), 1, 1
            )
        with self.assertRaises(PreconditionError):
            policy.disassortative_step(
                SignedQueueState(0), triplet("HHH"), -1, 1
            )


class TestTwowayStep(unittest.TestCase):

    def pair(self, text):
        return ArrivalPair(tuple(text))

    def test_rule(self):
        k_bar = 2
        for value in range(-k_bar, k_bar + 1):
            k = SignedQueueState(value)
            for pr in enumerate_arrival_pairs():
                if str(pr) == "Hl":
                    expected = min(value + 1, k_bar)
                elif str(pr) == "Lh":
                    expected = max(value - 1, -k_bar)
                else:
                    expected = value
                self.assertEqual(
                    policy.twoway_step(k, pr, k_bar),
                    SignedQueueState(expected),
                )

    def test_same_type_pairs(self):
        state, report = policy.twoway_transition(
            SignedQueueState(1), self.pair("Hh"), 2
        )
        self.assertEqual(state, SignedQueueState(1))
        self.assertEqual(compositions(report), ["Hh"])

    def test_cross_pair_meets_the_opposite_queue(self):
        state, report = policy.twoway_transition(
            SignedQueueState(-1), self.pair("Hl"), 2
        )
        self.assertEqual(state, SignedQueueState(0))
        self.assertEqual(compositions(report), ["Hh", "Ll"])
        state, report = policy.twoway_transition(
            SignedQueueState(2), self.pair("Lh"), 2
        )
        self.assertEqual(state, SignedQueueState(1))
        self.assertEqual(compositions(report), ["Hh", "Ll"])

    def test_forced_cross_pair(self):
        state, report = policy.twoway_transition(
            SignedQueueState(2), self.pair("Hl"), 2
        )
        self.assertEqual(state, SignedQueueState(2))
        self.assertEqual(compositions(report), ["Hl"])
        self.assertTrue(report.teams[0].forced)
        state, report = policy.twoway_transition(
            SignedQueueState(0), self.pair("Lh"), 0
        )
        self.assertEqual(compositions(report), ["Lh"])
        self.assertEqual(
            report.teams[0].sources, (policy.Source.ARRIVAL,) * 2
        )


class TestTransitionFunction(unittest.TestCase):

    def test_dispatch(self):
        step = policy.transition_function(
            ChainKind.ASSORTATIVE, ThresholdConfig(k_bar=2)
        )
        state, _ = step(AssortativeState((0, 0, 0)), triplet("HLL"))
        self.assertEqual(state, AssortativeState((1, 0, 0)))
        step = policy.transition_function(
            ChainKind.DISASSORTATIVE, ThresholdConfig(k_high=1, k_low=1)
        )
        state, _ = step(SignedQueueState(0), triplet("HHH"))
        self.assertEqual(state, SignedQueueState(1))
        step = policy.transition_function(
            "twoway", ThresholdConfig(k_bar=1)
        )
        state, _ = step(SignedQueueState(0), ArrivalPair(("L", "h")))
        self.assertEqual(state, SignedQueueState(-1))

    def test_assortative_needs_a_positive_threshold(self):
        with self.assertRaises(PreconditionError):
            policy.transition_function(
                ChainKind.ASSORTATIVE, ThresholdConfig(k_bar=0)
            )


if __name__ == "__main__":
    unittest.main()
