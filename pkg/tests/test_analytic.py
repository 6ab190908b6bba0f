import itertools
from unittest import TestCase

import numpy as np
from hypothesis import given, strategies as st

from ncrescue import analytic
from ncrescue.analytic import ChannelParams
from ncrescue.config import DEFAULT_BER_SWEEP, ber_grid
from ncrescue.channel import ber_to_per
from ncrescue.patterns import DestinationSet, LossPattern

GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


def channel(*omegas: float) -> ChannelParams:
    return ChannelParams(omegas)


@st.composite
def sorted_channels(draw, max_receivers=8):
    n = draw(st.integers(2, max_receivers))
    omegas = draw(st.lists(st.floats(0.0, 0.95), min_size=n, max_size=n))
    return ChannelParams(sorted(omegas), sorted_ascending=True)


class AnalyticTestCaseBase(TestCase):
    """ Base class for tests."""

    def assertRelativeEqual(self, value, expected, tolerance=1e-9):
        if expected == 0:
            self.assertAlmostEqual(value, 0.0, places=12)
            return
        self.assertLessEqual(abs(value - expected) / abs(expected), tolerance,
                             msg=f"{value} != {expected}")


class ChannelParamsTestCase(AnalyticTestCaseBase):
    """ Channel validation and sorting."""

    def test_validation(self):
        """ Loss rates must be in [0, 1) for at least two receivers."""
        with self.assertRaises(ValueError):
            channel(0.5)
        with self.assertRaises(ValueError):
            channel(0.5, 1.0)
        with self.assertRaises(ValueError):
            channel(-0.1, 0.5)
        with self.assertRaises(ValueError):
            ChannelParams((0.5, 0.1), sorted_ascending=True)

    def test_sort_channel(self):
        """ Sorting returns the permutation used."""
        sorted_channel, order = analytic.sort_channel(channel(0.3, 0.1, 0.2))
        self.assertEqual(sorted_channel.omegas, (0.1, 0.2, 0.3))
        self.assertTrue(sorted_channel.sorted_ascending)
        self.assertEqual(order, (2, 3, 1))

    def test_rank(self):
        """ Ties are ranked by receiver index."""
        self.assertEqual(channel(0.3, 0.1, 0.3).rank(), {2: 0, 1: 1, 3: 2})


class ExpectationTestCase(AnalyticTestCaseBase):
    """ Per-queue expectations."""

    def test_rescue_expectation(self):
        """ Queue size over the probability of leaving the queue."""
        self.assertAlmostEqual(analytic.rescue_expectation(
            100, {1, 2}, channel(0.5, 0.5)), 400 / 3)
        self.assertEqual(analytic.rescue_expectation(
            50, {1}, channel(0.0, 0.5)), 50)
        self.assertAlmostEqual(analytic.rescue_expectation(
            1, {1}, channel(0.5, 0.5)), 2.0)

    def test_rescue_expectation_geometric(self):
        """ Matches a truncated sum over retransmission sequences."""
        omega = 0.5
        expected = sum(k * omega ** (k - 1) * (1 - omega)
                       for k in range(1, 200))
        self.assertAlmostEqual(analytic.rescue_expectation(
            1, {1}, channel(omega, 0.1)), expected)

    def test_rescue_expectation_full_pattern(self):
        """ A pattern held by everyone is not a loss."""
        with self.assertRaises(ValueError):
            analytic.rescue_expectation(1, (), channel(0.5, 0.5))

    def test_transfer_expectation(self):
        """ Rescue transmissions times the transition probability."""
        zeros, second = LossPattern(0, 2), LossPattern(0b10, 2)
        dest = DestinationSet.of(1)
        self.assertAlmostEqual(analytic.transfer_expectation(
            100, zeros, second, dest, channel(0.5, 0.5)), 100 / 3)
        self.assertEqual(analytic.transfer_expectation(
            100, second, zeros, dest, channel(0.5, 0.5)), 0.0)
        self.assertEqual(analytic.transfer_expectation(
            0, zeros, second, dest, channel(0.5, 0.5)), 0.0)

    def test_pair_counts(self):
        """ Coded retransmissions and natives left alone."""
        coded, solo = analytic.lemma1_counts(10, 20, 0.2, 0.5)
        self.assertAlmostEqual(coded, 12.5)
        self.assertAlmostEqual(solo, 13.75)
        self.assertEqual(analytic.lemma1_counts(0, 20, 0.2, 0.5), (0.0, 20))
        coded, solo = analytic.lemma1_counts(10, 10, 0.3, 0.3)
        self.assertAlmostEqual(coded, 100 / 7)
        self.assertAlmostEqual(solo, 0.0)

    def test_pair_counts_preconditions(self):
        """ Only dominated queues are accepted."""
        with self.assertRaises(ValueError):
            analytic.lemma1_counts(20, 10, 0.2, 0.5)
        with self.assertRaises(ValueError):
            analytic.lemma1_counts(10, 20, 0.5, 0.2)

    def test_initial_pattern_prob(self):
        """ Bernoulli product over receivers."""
        omegas = channel(0.5, 0.5)
        self.assertAlmostEqual(analytic.initial_pattern_prob(
            LossPattern(0b10, 2), 1, omegas), 0.25)
        self.assertEqual(analytic.initial_pattern_prob(
            LossPattern(0b01, 2), 1, omegas), 0.0)

    def test_initial_pattern_total(self):
        """ Patterns of a destination add up to its loss rate."""
        omegas = channel(0.1, 0.35, 0.2, 0.6)
        for dest in range(1, 5):
            total = sum(analytic.initial_pattern_prob(
                LossPattern(mask, 4), dest, omegas) for mask in range(16))
            self.assertAlmostEqual(total, omegas.omega(dest))


class LambdaTestCase(AnalyticTestCaseBase):
    """ Average retransmissions per packet."""

    def test_ncarq(self):
        """ NC-ARQ closed form values."""
        self.assertAlmostEqual(analytic.lambda_ncarq(channel(0.5, 0.5)), 0.75)
        self.assertEqual(analytic.lambda_ncarq(channel(0, 0, 0)), 0)
        self.assertAlmostEqual(
            analytic.lambda_ncarq(channel(0.1, 0.2, 0.3)), 0.17008, places=5)

    def test_ear(self):
        """ EAR closed form values."""
        self.assertAlmostEqual(analytic.lambda_ear(channel(0.5, 0.5)), 2 / 3)
        self.assertEqual(analytic.lambda_ear(channel(0, 0, 0)), 0)
        self.assertAlmostEqual(
            analytic.lambda_ear(channel(0.1, 0.2, 0.3)), 0.16615, places=5)

    def test_arq(self):
        """ Geometric retransmissions of every loss."""
        self.assertAlmostEqual(analytic.lambda_arq(channel(0.5, 0.5)), 1.0)
        self.assertAlmostEqual(analytic.lambda_arq(channel(0.3, 0.0)),
                               0.3 / 0.7 / 2)

    def test_unsorted_rejected(self):
        """ Closed forms need ascending loss rates."""
        with self.assertRaises(ValueError):
            analytic.lambda_ncarq(channel(0.3, 0.1))
        with self.assertRaises(ValueError):
            analytic.lambda_ear(channel(0.3, 0.1))

    def test_dominance_grid(self):
        """ EAR never needs more retransmissions than NC-ARQ."""
        for n in range(2, 6):
            for omegas in itertools.combinations_with_replacement(GRID, n):
                sorted_channel = ChannelParams(omegas, sorted_ascending=True)
                self.assertLessEqual(analytic.lambda_ear(sorted_channel),
                                     analytic.lambda_ncarq(sorted_channel))

    @given(sorted_channels())
    def test_dominance(self, sorted_channel):
        """ EAR bound holds for any sorted channel."""
        ear = analytic.lambda_ear(sorted_channel)
        ncarq = analytic.lambda_ncarq(sorted_channel)
        self.assertLessEqual(ear, ncarq * (1 + 1e-12))
        self.assertLessEqual(ncarq, analytic.lambda_arq(sorted_channel)
                             * (1 + 1e-12))

    def test_gain(self):
        """ NC-ARQ over EAR ratio."""
        self.assertAlmostEqual(analytic.analytic_gain(channel(0.5, 0.5)),
                               1.125)
        self.assertAlmostEqual(analytic.analytic_gain(channel(0.3, 0.2, 0.1)),
                               0.17008 / 0.16615, places=3)
        self.assertEqual(analytic.analytic_gain(channel(0, 0)), 1.0)

    def test_gain_grows_with_ber(self):
        """ Gain increases over the BER sweep."""
        gains = [analytic.analytic_gain(
                     ChannelParams.uniform(3, ber_to_per(b)))
                 for b in ber_grid(*DEFAULT_BER_SWEEP)]
        self.assertAlmostEqual(gains[0], 1.0, places=2)
        for lighter, heavier in zip(gains, gains[1:]):
            self.assertLess(lighter, heavier)

    def test_gain_grows_with_receivers(self):
        """ At heavy BER gain is non-decreasing in N with slowing growth."""
        omega = ber_to_per(3e-3)
        counts = (3, 5, 10, 15, 20, 25)
        gains = [analytic.analytic_gain(ChannelParams.uniform(n, omega))
                 for n in counts]
        for lighter, heavier in zip(gains, gains[1:]):
            self.assertLessEqual(lighter, heavier)
        steps = [(b - a) / (m - n) for (a, n), (b, m) in
                 zip(zip(gains, counts), zip(gains[1:], counts[1:]))]
        for earlier, later in zip(steps, steps[1:]):
            self.assertLessEqual(later, earlier)


class UnwantedTestCase(AnalyticTestCaseBase):
    """ Symmetric 3-receiver unwanted packet accounting."""

    def test_unwanted_overhead(self):
        """ Expected solo deliveries of unwanted packets."""
        self.assertAlmostEqual(analytic.unwanted_overhead(1000, 0.8), 138.43,
                               places=2)
        self.assertEqual(analytic.unwanted_overhead(1000, 0.5), 0.0)
        self.assertEqual(analytic.unwanted_overhead(0, 0.9), 0.0)
        with self.assertRaises(ValueError):
            analytic.unwanted_overhead(1000, 1.0)

    def test_n1_n2(self):
        """ Queue sizes at the end of the first rescue stage."""
        n1, n2 = analytic.n1_n2(1000, 0.5)
        self.assertAlmostEqual(n1, 1000 / 7)
        self.assertAlmostEqual(n2, 23.8095, places=4)
        self.assertEqual(analytic.n1_n2(1000, 0), (0.0, 0.0))

    def test_n1_n2_condition(self):
        """ N1 >= N2 exactly when no unwanted packets are expected."""
        for omega in np.linspace(0.01, 0.98, 98):
            n1, n2 = analytic.n1_n2(1000, omega)
            no_unwanted = omega ** 3 + omega ** 2 - 1 <= 0
            self.assertEqual(n1 >= n2, no_unwanted, msg=omega)
            self.assertEqual(
                analytic.unwanted_overhead(1000, omega) == 0, no_unwanted)


class PrimarySetTestCase(AnalyticTestCaseBase):
    """ Partition of patterns into receiver primary sets."""

    def test_first_receiver(self):
        """ Receiver 1 owns only its all-zero pattern."""
        sets = analytic.primary_sets(1, 2)
        self.assertEqual(sets.upper, {(LossPattern(0, 2),
                                       DestinationSet.of(1))})
        self.assertEqual(sets.lower, frozenset())

    def test_upper_size(self):
        """ Receiver i owns 2^(i-1) of its patterns."""
        for i in range(1, 6):
            self.assertEqual(len(analytic.primary_sets(i, 5).upper),
                             2 ** (i - 1))

    def test_partition(self):
        """ Primary sets are disjoint and cover every pattern."""
        for n in range(2, 6):
            expected = {(LossPattern(mask, n), DestinationSet.of(r))
                        for r in range(1, n + 1) for mask in range(1 << n)
                        if not (mask >> (r - 1)) & 1}
            seen = set()
            for i in range(1, n + 1):
                union = analytic.primary_sets(i, n).union
                self.assertFalse(seen & union)
                seen |= union
            self.assertEqual(seen, expected)

    def test_reject_receiver(self):
        """ Receiver index must be in [1, N]."""
        with self.assertRaises(ValueError):
            analytic.primary_sets(3, 2)


class FlowSolverTestCase(AnalyticTestCaseBase):
    """ Numerical pattern flows against closed forms."""

    def test_phi_rescue_total(self):
        """ Retransmissions charged to a primary set."""
        self.assertAlmostEqual(analytic.phi_rescue_total(
            2, 1000, channel(0.5, 0.5)), 1000)
        self.assertEqual(analytic.phi_rescue_total(
            1, 1000, channel(0.0, 0.0)), 0)

    def test_primary_totals_sum_to_lambda(self):
        """ Primary set totals add up to the EAR closed form."""
        omegas = channel(0.1, 0.2, 0.3)
        total = sum(analytic.phi_rescue_total(i, 1000, omegas)
                    for i in range(1, 4))
        self.assertRelativeEqual(total / 3000, analytic.lambda_ear(omegas))

    def test_two_receivers(self):
        """ Solver reproduces 2/3 retransmissions per packet."""
        ledger = analytic.pattern_flow_solve(10 ** 6, channel(0.5, 0.5))
        self.assertRelativeEqual(ledger.total / (2 * 10 ** 6), 2 / 3)

    def test_three_receivers(self):
        """ Solver reproduces the EAR closed form."""
        omegas = channel(0.1, 0.2, 0.3)
        ledger = analytic.pattern_flow_solve(1000, omegas)
        self.assertRelativeEqual(ledger.total / 3000,
                                 analytic.lambda_ear(omegas))

    def test_empty(self):
        """ No packets, no flows."""
        self.assertFalse(analytic.pattern_flow_solve(0, channel(0.5, 0.5)))

    def test_random_channels(self):
        """ Per primary set totals match for random channels."""
        rng = np.random.default_rng(20)
        for n in range(2, 7):
            for _ in range(20):
                omegas = ChannelParams(sorted(rng.uniform(0.01, 0.95, n)),
                                       sorted_ascending=True)
                ledger = analytic.pattern_flow_solve(1000, omegas)
                for i in range(1, n + 1):
                    self.assertRelativeEqual(
                        ledger.totals[i],
                        analytic.phi_rescue_total(i, 1000, omegas))

    def test_ledger_conservation(self):
        """ Inflow is original packets plus incoming transfers."""
        ledger = analytic.pattern_flow_solve(1000, channel(0.2, 0.4, 0.5, 0.7))
        for key, inflow in ledger.inflow.items():
            self.assertRelativeEqual(
                inflow, ledger.initial[key] + ledger.incoming(key))
            self.assertGreaterEqual(ledger.rescue[key], 0)
        for amount in ledger.transfers.values():
            self.assertGreaterEqual(amount, 0)

    def test_too_many_receivers(self):
        """ Pattern enumeration is bounded."""
        with self.assertRaises(ValueError):
            analytic.pattern_flow_solve(
                1, ChannelParams.uniform(analytic.MAX_FLOW_RECEIVERS + 1, 0.1))
