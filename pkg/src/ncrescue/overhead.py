""" Coding header length accounting."""
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from ncrescue.analytic import ChannelParams
from ncrescue.models import Packet

# Header variants.
#
# SCHEME_A records a 2-byte hash of source address and sequence number for
# every native packet XORed into the transmission.
# SCHEME_B appends a fixed receive bitmap per destination, independent of the
# number of coded packets.
SCHEME_A, SCHEME_B = 'A', 'B'
VARIANTS = (SCHEME_A, SCHEME_B)


@dataclass(frozen=True)
class HeaderModel:
    variant: str = SCHEME_A
    hash_bytes: int = 2
    per_destination_bytes: int = 19
    window_packets: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown header variant {self.variant!r}")
        if self.hash_bytes <= 0 or self.per_destination_bytes <= 0:
            raise ValueError("header sizes must be positive")
        if self.window_packets is None:
            # one bitmap bit per packet of the batch window
            object.__setattr__(self, 'window_packets',
                               self.per_destination_bytes * 8)
        elif self.window_packets <= 0:
            raise ValueError("window must hold at least one packet")


def header_len(packet: Packet, model: HeaderModel, n: int,
               window_start: Optional[int] = None) -> int:
    """
    Coding header bytes carried by a transmitted packet.

    :param packet: native or coded packet on air
    :param model: header variant
    :param n: number of receivers
    :param window_start: first sequence number of the Scheme B bitmap window,
        checked only when given
    """
    if model.variant == SCHEME_A:
        return model.hash_bytes * packet.nc_count
    if window_start is not None:
        end = window_start + model.window_packets
        for native in packet.constituents:
            seq = native // n
            if not window_start <= seq < end:
                raise ValueError(f"packet {native} (sequence {seq}) outside "
                                 f"window [{window_start}, {end})")
    return model.per_destination_bytes * n


def worst_case_total(packets: int,
                     channel: Union[ChannelParams, Sequence[float]],
                     model: HeaderModel, n: Optional[int] = None) -> float:
    """
    Header bytes needed when every lost packet is recorded once.

    Scheme A records 2 bytes per expected loss, ``2 K (ω_1 + ... + ω_N)``;
    Scheme B always carries ``19 N`` bytes per packet.
    """
    omegas = channel.omegas if isinstance(channel, ChannelParams) else channel
    n = len(omegas) if n is None else n
    if packets < 0:
        raise ValueError("packet count must not be negative")
    if not packets:
        return 0
    if model.variant == SCHEME_A:
        return model.hash_bytes * packets * sum(omegas)
    return model.per_destination_bytes * n
