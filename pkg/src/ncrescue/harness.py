""" Running experiment grids, retransmission gains and CSV output."""
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from scipy import stats

from ncrescue.analytic import (MAX_FLOW_RECEIVERS, ChannelParams, lambda_arq,
                               lambda_ear, lambda_ncarq, pattern_flow_solve,
                               sort_channel)
from ncrescue.config import ExperimentConfig, GridPoint
from ncrescue.exceptions import ExperimentAborted, RoundCapExceeded
from ncrescue.overhead import SCHEME_A, SCHEME_B
from ncrescue.schemes import (ARQ, EAR, NCARQ, SCHEMES, Simulation,
                              TrialResult, run_trial)

logger = logging.getLogger(__name__)

CSV_FIELDS = (
    'scheme', 'N', 'ber', 'omega_csv', 'K', 'trials', 'seed',
    'total_retx_mean', 'total_retx_ci95', 'lambda_empirical',
    'lambda_analytic', 'gain_vs_arq', 'gain_vs_ncarq', 'unwanted_count',
    'overhead_a_bytes', 'overhead_b_bytes', 'header_a_total_bytes',
    'header_b_total_bytes',
)

# Relative Monte Carlo vs closed form gap worth a warning.
ANALYTIC_TOLERANCE = 0.05

CONFIDENCE = 0.95


def gain(baseline_retx: float, ear_retx: float) -> float:
    """ Baseline retransmissions divided by the compared scheme's."""
    if baseline_retx < 0 or ear_retx < 0:
        raise ValueError("retransmission counts must not be negative")
    if not ear_retx:
        if not baseline_retx:
            # lossless channel, both schemes are equally good
            return 1.0
        raise ValueError("gain over a scheme without retransmissions")
    return baseline_retx / ear_retx


def half_width(values: Sequence[float]) -> float:
    """ Normal approximation half-width of the 95% confidence interval."""
    if len(values) < 2:
        return 0.0
    z = stats.norm.ppf(0.5 + CONFIDENCE / 2)
    return float(z * np.std(values, ddof=1) / math.sqrt(len(values)))


def analytic_lambda(scheme: str, channel: ChannelParams,
                    packets: int) -> float:
    """ Closed form retransmissions per packet of a scheme."""
    channel, _ = sort_channel(channel)
    if scheme == ARQ:
        return lambda_arq(channel)
    if scheme == NCARQ:
        return lambda_ncarq(channel)
    if channel.n <= MAX_FLOW_RECEIVERS:
        ledger = pattern_flow_solve(packets, channel)
        return ledger.total / (packets * channel.n)
    return lambda_ear(channel)


@dataclass(frozen=True)
class ExperimentRow:
    """ Aggregated trials of one scheme at one grid point."""
    scheme: str
    point: GridPoint
    packets: int
    seed: int
    totals: Tuple[int, ...]
    unwanted: float
    overhead_a: float
    overhead_b: float
    # header bytes of a whole trial, averaged over trials
    header_a_total: float
    header_b_total: float
    lambda_analytic: Optional[float] = None
    gain_vs_arq: Optional[float] = None
    gain_vs_ncarq: Optional[float] = None

    @classmethod
    def from_trials(cls, scheme: str, point: GridPoint, packets: int,
                    seed: int, results: Sequence[TrialResult]
                    ) -> "ExperimentRow":
        retransmissions = sum(r.retransmissions for r in results)

        def overhead(variant):
            if not retransmissions:
                return 0.0
            return sum(r.header_bytes[variant]
                       for r in results) / retransmissions

        def per_trial(variant):
            return float(np.mean([r.header_bytes[variant] for r in results]))

        return cls(scheme, point, packets, seed,
                   tuple(r.retransmissions for r in results),
                   float(np.mean([r.unwanted for r in results])),
                   overhead(SCHEME_A), overhead(SCHEME_B),
                   per_trial(SCHEME_A), per_trial(SCHEME_B))

    @property
    def key(self) -> tuple:
        return self.point.key, SCHEMES.index(self.scheme)

    @property
    def trials(self) -> int:
        return len(self.totals)

    @property
    def mean(self) -> float:
        return float(np.mean(self.totals))

    @property
    def ci95(self) -> float:
        return half_width(self.totals)

    @property
    def lambda_empirical(self) -> float:
        return self.mean / (self.packets * self.point.n)

    def as_csv(self) -> Dict[str, str]:
        omegas = ';'.join(_fmt(omega) for omega in self.point.channel.omegas)
        values = (
            self.scheme, self.point.n, self.point.ber, omegas, self.packets,
            self.trials, self.seed, self.mean, self.ci95,
            self.lambda_empirical, self.lambda_analytic, self.gain_vs_arq,
            self.gain_vs_ncarq, self.unwanted, self.overhead_a,
            self.overhead_b, self.header_a_total, self.header_b_total,
        )
        return dict(zip(CSV_FIELDS, map(_fmt, values)))


@dataclass(frozen=True)
class GainRow:
    """ Paired per-trial gains of ``scheme`` over ``baseline``."""
    baseline: str
    scheme: str
    n: int
    ber: Optional[float]
    omegas: Tuple[float, ...]
    mean_gain: float
    half_width: float
    analytic: Optional[float]
    trials: int


def _fmt(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return format(value, '.10g')
    return str(value)


def run_trials(simulation: Simulation, scheme: str,
               trials: int) -> List[TrialResult]:
    """ Run trials 0..trials-1 of one scheme."""
    return [run_trial(simulation, scheme, trial) for trial in range(trials)]


def _collect(config: ExperimentConfig
             ) -> Dict[Tuple[GridPoint, str], List[TrialResult]]:
    tasks = [(point, scheme) for point in config.grid()
             for scheme in config.schemes]
    results = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                (point, scheme): pool.submit(
                    run_trials, config.simulation(point), scheme,
                    config.trials)
                for point, scheme in tasks}
            for (point, scheme), future in futures.items():
                try:
                    results[(point, scheme)] = future.result()
                except RoundCapExceeded as e:
                    raise ExperimentAborted(scheme, point, e) from e
        return results

    for point, scheme in tasks:
        try:
            results[(point, scheme)] = run_trials(
                config.simulation(point), scheme, config.trials)
        except RoundCapExceeded as e:
            raise ExperimentAborted(scheme, point, e) from e
    return results


def run_experiment(config: ExperimentConfig) -> List[ExperimentRow]:
    """
    Run every scheme at every grid point.

    Rows are sorted by grid point and scheme so the output does not depend on
    the number of workers.
    """
    results = _collect(config)
    rows = []
    for (point, scheme), trials in results.items():
        row = ExperimentRow.from_trials(scheme, point, config.packets,
                                        config.seed, trials)
        means = {s: np.mean([r.retransmissions for r in results[(point, s)]])
                 for s in config.schemes}
        updates = {}
        if ARQ in means:
            updates['gain_vs_arq'] = gain(means[ARQ], row.mean)
        if NCARQ in means:
            updates['gain_vs_ncarq'] = gain(means[NCARQ], row.mean)
        if config.compare_analytic:
            predicted = analytic_lambda(scheme, point.channel, config.packets)
            updates['lambda_analytic'] = predicted
            _check_analytic(row, predicted)
        row = replace(row, **updates)
        logger.info("%s N=%d ber=%s omega=%s: %.1f retransmissions, "
                    "lambda=%.5f, analytic=%s", scheme, point.n, point.ber,
                    point.channel.omegas, row.mean, row.lambda_empirical,
                    row.lambda_analytic)
        rows.append(row)
    rows.sort(key=lambda r: r.key)
    return rows


def _check_analytic(row: ExperimentRow, predicted: float):
    if not predicted:
        return
    gap = abs(row.lambda_empirical - predicted) / predicted
    if gap > ANALYTIC_TOLERANCE:
        logger.warning("%s N=%d omega=%s: simulated lambda %.5f is %.1f%% "
                       "off the closed form %.5f", row.scheme, row.point.n,
                       row.point.channel.omegas, row.lambda_empirical,
                       gap * 100, predicted)


def gain_rows(rows: Iterable[ExperimentRow], baseline: str = NCARQ,
              scheme: str = EAR) -> List[GainRow]:
    """ Paired per-trial gains for grid points where both schemes ran."""
    by_point: Dict[GridPoint, Dict[str, ExperimentRow]] = {}
    for row in rows:
        by_point.setdefault(row.point, {})[row.scheme] = row
    gains = []
    for point in sorted(by_point, key=lambda p: p.key):
        pair = by_point[point]
        if baseline not in pair or scheme not in pair:
            continue
        paired = [gain(b, s) for b, s in zip(pair[baseline].totals,
                                             pair[scheme].totals)]
        channel = point.channel
        analytic = None
        if pair[scheme].lambda_analytic is not None:
            packets = pair[scheme].packets
            analytic = gain(analytic_lambda(baseline, channel, packets),
                            analytic_lambda(scheme, channel, packets))
        gains.append(GainRow(baseline, scheme, point.n, point.ber,
                             channel.omegas, float(np.mean(paired)),
                             half_width(paired), analytic, len(paired)))
    return gains


def write_csv(rows: Iterable[ExperimentRow], stream: TextIO):
    writer = csv.DictWriter(stream, fieldnames=CSV_FIELDS,
                            lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv())
