""" Command line front end: ``ncrescue`` / ``python -m ncrescue``."""
import argparse
import logging
import sys
from typing import List, Optional

from ncrescue.config import FULL_SCALE_PACKETS, describe, load_config
from ncrescue.exceptions import ExperimentAborted
from ncrescue.harness import gain_rows, run_experiment, write_csv
from ncrescue.schemes import SCHEMES

logger = logging.getLogger(__name__)

# Exit statuses.
EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='ncrescue',
        description="Simulate ARQ, NC-ARQ and EAR retransmission of lost "
                    "packets on a one-hop broadcast and write CSV results.")
    parser.add_argument('--config', help="JSON file with config keys")
    parser.add_argument('--scheme', dest='schemes', action='append',
                        choices=SCHEMES, help="scheme to run (repeatable)")
    parser.add_argument('--receivers', type=int, nargs='+',
                        help="receiver counts N")
    parser.add_argument('--packets', type=int,
                        help="packets K per receiver")
    parser.add_argument('--ber-sweep', type=float, nargs=3,
                        metavar=('START', 'STOP', 'STEP'),
                        help="bit error rate sweep, stop inclusive")
    parser.add_argument('--loss', type=float, nargs='+',
                        help="one loss rate for all receivers or one each")
    parser.add_argument('--trials', type=int, help="trials per grid point")
    parser.add_argument('--seed', type=int, help="base random seed")
    parser.add_argument('--out', dest='output',
                        help="CSV path, standard output by default")
    parser.add_argument('--compare-analytic', action='store_true',
                        default=None, help="add closed form predictions")
    parser.add_argument('--round-cap', type=int,
                        help="abort trials running more rounds")
    parser.add_argument('--workers', type=int,
                        help="worker processes for grid points")
    parser.add_argument('--full-scale', action='store_true',
                        help=f"K={FULL_SCALE_PACKETS} unless --packets")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="-v for progress, -vv for every round")
    return parser


def _log_level(verbosity: int) -> int:
    if verbosity >= 2:
        return logging.DEBUG
    if verbosity == 1:
        return logging.INFO
    return logging.WARNING


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=_log_level(args.verbose), stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: '
                               '%(message)s')
    packets = args.packets
    if packets is None and args.full_scale:
        packets = FULL_SCALE_PACKETS
    try:
        config = load_config(
            args.config, schemes=args.schemes, receivers=args.receivers,
            packets=packets, ber_sweep=args.ber_sweep, loss=args.loss,
            trials=args.trials, seed=args.seed, output=args.output,
            compare_analytic=args.compare_analytic,
            round_cap=args.round_cap, workers=args.workers)
    except (OSError, ValueError, TypeError) as e:
        logger.error("invalid configuration: %s", e)
        return EXIT_CONFIG
    for line in describe(config):
        logger.info("config %s", line)

    try:
        rows = run_experiment(config)
    except ExperimentAborted as e:
        logger.error("experiment aborted: %s", e)
        return EXIT_ABORTED

    for row in gain_rows(rows):
        logger.info("%s over %s N=%d ber=%s: gain %.4f +- %.4f "
                    "(closed form %s)", row.scheme, row.baseline, row.n,
                    row.ber, row.mean_gain, row.half_width, row.analytic)
    if config.output is None:
        write_csv(rows, sys.stdout)
    else:
        with open(config.output, 'w', newline='') as f:
            write_csv(rows, f)
    return EXIT_OK
