""" Experiment configuration: JSON file, CLI overrides and the grid."""
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterator, List, Mapping, NamedTuple, Optional, Tuple

from ncrescue.analytic import ChannelParams
from ncrescue.channel import FecModel, ber_to_per
from ncrescue.patterns import MAX_RECEIVERS
from ncrescue.schemes import DEFAULT_ROUND_CAP, SCHEMES, Simulation

SEED_ENV = 'NCRESCUE_SEED'

DEFAULT_PACKETS = 10 ** 4
FULL_SCALE_PACKETS = 10 ** 5
DEFAULT_TRIALS = 30
DEFAULT_SEED = 1
DEFAULT_BER_SWEEP = (1e-4, 3.5e-3, 5e-4)

# Loss rates above this never terminate in practice.
MAX_LOSS = 0.99

FEC_KEYS = ('packet_bytes', 'rs_n', 'rs_k', 'symbol_bits')


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None:
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{SEED_ENV}={value!r} is not an integer")


def ber_grid(start: float, stop: float, step: float) -> Tuple[float, ...]:
    """ Bit error rates from ``start`` to ``stop`` (inclusive) by ``step``."""
    if step <= 0:
        raise ValueError("sweep step must be positive")
    if start > stop:
        raise ValueError("sweep start exceeds its stop")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


class GridPoint(NamedTuple):
    """ One channel configuration of an experiment."""
    n: int
    ber: Optional[float]
    channel: ChannelParams

    @property
    def key(self) -> tuple:
        return self.n, -1.0 if self.ber is None else self.ber, \
            self.channel.omegas


@dataclass(frozen=True)
class ExperimentConfig:
    """
    What to simulate.

    ``loss`` holds either one loss rate for every receiver or one per
    receiver; without it the channel is derived from ``ber_sweep`` through
    the FEC model. ``slot_time`` only documents the retransmission slot.
    """
    schemes: Tuple[str, ...] = SCHEMES
    receivers: Tuple[int, ...] = (3,)
    packets: int = DEFAULT_PACKETS
    loss: Optional[Tuple[float, ...]] = None
    ber_sweep: Optional[Tuple[float, float, float]] = None
    trials: int = DEFAULT_TRIALS
    seed: int = field(default_factory=default_seed)
    round_cap: int = DEFAULT_ROUND_CAP
    output: Optional[str] = None
    compare_analytic: bool = False
    workers: int = 1
    slot_time: Optional[float] = None
    fec: FecModel = FecModel()

    def __post_init__(self):
        schemes = tuple(dict.fromkeys(self.schemes))
        object.__setattr__(self, 'schemes', schemes)
        object.__setattr__(self, 'receivers', tuple(self.receivers))
        if self.loss is not None:
            object.__setattr__(self, 'loss', tuple(self.loss))
        if self.loss is None and self.ber_sweep is None:
            object.__setattr__(self, 'ber_sweep', DEFAULT_BER_SWEEP)
        if self.ber_sweep is not None:
            object.__setattr__(self, 'ber_sweep', tuple(self.ber_sweep))
        self.validate()

    def validate(self):
        if not self.schemes:
            raise ValueError("no schemes to run")
        for scheme in self.schemes:
            if scheme not in SCHEMES:
                raise ValueError(f"unknown scheme {scheme!r}")
        if not self.receivers:
            raise ValueError("no receiver counts to run")
        for n in self.receivers:
            if not 2 <= n <= MAX_RECEIVERS:
                raise ValueError(f"{n} receivers, expected 2 to "
                                 f"{MAX_RECEIVERS}")
        if self.packets < 1:
            raise ValueError("at least one packet per receiver is required")
        if self.trials < 1:
            raise ValueError("at least one trial is required")
        if self.seed < 0:
            raise ValueError("seed must not be negative")
        if self.round_cap < 1:
            raise ValueError("round cap must be positive")
        if self.workers < 1:
            raise ValueError("at least one worker is required")
        if self.loss is not None and self.ber_sweep is not None:
            raise ValueError("give either loss rates or a BER sweep")
        if self.loss is not None:
            if len(self.loss) != 1 and any(n != len(self.loss)
                                           for n in self.receivers):
                raise ValueError(f"{len(self.loss)} loss rates do not match "
                                 f"receiver counts {self.receivers}")
            for omega in self.loss:
                _check_loss(omega)
        if self.ber_sweep is not None:
            if len(self.ber_sweep) != 3:
                raise ValueError("BER sweep needs start, stop and step")
            for ber in ber_grid(*self.ber_sweep):
                _check_loss(ber_to_per(ber, self.fec))

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any],
                     **overrides) -> "ExperimentConfig":
        """ Build config from flat key-value data; overrides win."""
        names = {f.name for f in dataclasses.fields(cls)} - {'fec'}
        overrides = {k: v for k, v in overrides.items() if v is not None}
        data = dict(data)
        # a channel given on the command line replaces the file's one
        if 'loss' in overrides:
            data.pop('ber_sweep', None)
        if 'ber_sweep' in overrides:
            data.pop('loss', None)
        data.update(overrides)
        unknown = set(data) - names - set(FEC_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        fec = {k: data.pop(k) for k in FEC_KEYS if k in data}
        if fec:
            data['fec'] = FecModel(**fec)
        for key in ('schemes', 'receivers', 'loss', 'ber_sweep'):
            if isinstance(data.get(key), (str, int, float)):
                data[key] = (data[key],)
        return cls(**data)

    def simulation(self, point: GridPoint) -> Simulation:
        return Simulation(self.packets, point.channel, self.seed,
                          self.round_cap)

    def grid(self) -> Iterator[GridPoint]:
        for n in self.receivers:
            if self.loss is not None:
                omegas = self.loss * n if len(self.loss) == 1 else self.loss
                yield GridPoint(n, None, ChannelParams(omegas))
                continue
            for ber in ber_grid(*self.ber_sweep):
                omega = ber_to_per(ber, self.fec)
                yield GridPoint(n, ber, ChannelParams.uniform(n, omega))


def _check_loss(omega: float):
    if not 0.0 <= omega <= MAX_LOSS:
        raise ValueError(f"loss rate {omega:.4g} outside [0, {MAX_LOSS}]")


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """ Read a JSON config file and apply overrides that are not None."""
    data = {}
    if path is not None:
        with open(path) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
    return ExperimentConfig.from_mapping(data, **overrides)


def describe(config: ExperimentConfig) -> List[str]:
    """ Config as ``key=value`` lines for logs."""
    return [f"{f.name}={getattr(config, f.name)!r}"
            for f in dataclasses.fields(config)]
