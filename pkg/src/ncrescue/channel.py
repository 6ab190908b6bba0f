""" Bernoulli erasure channel and BER to packet erasure mapping."""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from ncrescue.analytic import ChannelParams

# Stream round used by the initial transmission of every native packet.
INITIAL_ROUND = 0


@dataclass(frozen=True)
class FecModel:
    """
    Reed-Solomon protected packet.

    A packet of ``packet_bytes`` is split into blocks of ``rs_k`` data symbols
    coded into ``rs_n`` symbols; a block fails when more than
    ``correctable_symbols`` of its symbols are corrupted and the packet is
    lost when any block fails. ``crc`` marks error detection as perfect.
    """
    packet_bytes: int = 1532
    rs_n: int = 32
    rs_k: int = 28
    correctable_symbols: Optional[int] = None
    symbol_bits: int = 8
    crc: bool = True

    def __post_init__(self):
        if self.packet_bytes <= 0:
            raise ValueError("packet size must be positive")
        if not 0 < self.rs_k < self.rs_n:
            raise ValueError(f"invalid code RS({self.rs_n}, {self.rs_k})")
        if self.symbol_bits <= 0:
            raise ValueError("symbol size must be positive")
        t = (self.rs_n - self.rs_k) // 2
        if self.correctable_symbols is None:
            object.__setattr__(self, 'correctable_symbols', t)
        elif self.correctable_symbols != t:
            raise ValueError(f"RS({self.rs_n}, {self.rs_k}) corrects {t} "
                             f"symbols, not {self.correctable_symbols}")

    @property
    def t(self) -> int:
        return self.correctable_symbols

    @property
    def blocks(self) -> int:
        """ Number of RS blocks per packet."""
        data_bytes = self.rs_k * self.symbol_bits / 8
        return math.ceil(self.packet_bytes / data_bytes)


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random source of one trial.

    Every (round, receiver) pair owns an independent Philox generator keyed
    by ``(seed, trial, round, receiver)``, so draws never depend on the order
    in which trials or receivers are sampled.
    """
    seed: int
    trial: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.trial < 0:
            raise ValueError("seed and trial must not be negative")

    def generator(self, round_no: int, receiver: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            self.seed, spawn_key=(self.trial, round_no, receiver))
        return np.random.Generator(np.random.Philox(sequence))


def ber_to_per(ber: float, fec: FecModel = FecModel()) -> float:
    """ Packet erasure probability for a given bit error rate."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"bit error rate {ber} outside [0, 1]")
    symbol_error = 1.0 - (1.0 - ber) ** fec.symbol_bits
    block_failure = float(stats.binom.sf(fec.t, fec.rs_n, symbol_error))
    return 1.0 - (1.0 - block_failure) ** fec.blocks


def sample_round(channel: Union[ChannelParams, Sequence[float]],
                 transmissions: int, stream: RngStream,
                 round_no: int = INITIAL_ROUND) -> np.ndarray:
    """
    Draw deliveries of one round.

    :return: boolean matrix, row per transmission and column per receiver,
        true where the receiver got the transmission.
    """
    omegas = channel.omegas if isinstance(channel, ChannelParams) else channel
    deliveries = np.empty((transmissions, len(omegas)), dtype=bool)
    for index, omega in enumerate(omegas):
        generator = stream.generator(round_no, index + 1)
        deliveries[:, index] = generator.random(transmissions) >= omega
    return deliveries
