"""Fixed 15-byte NetworkMessage carrying one (SFN, t_TSN[SFN]) DataSetMessage.

Wire layout (all multi-byte fields little-endian)::

    offset  size  field
    0       2     magic            0x54 0x53 ("TS")
    2       1     version          0x01
    3       1     flags            0x00
    4       1     dsm_header       0x01 (field count of the DataSetMessage)
    5       2     field_sfn        uint16, <= 1023
    7       8     field_t_tsn      int64, nanoseconds

The UADP NetworkMessage/DataSetMessage layering is kept, but publisher id,
writer id and sequence numbers are collapsed into the fixed header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable

from tsn5g_syncsim.netsim import Simulator

MAGIC = b"TS"
VERSION = 0x01
FLAGS = 0x00
DSM_HEADER = 0x01
MESSAGE_LEN = 15

_LAYOUT = struct.Struct("<2sBBBHq")
assert _LAYOUT.size == MESSAGE_LEN


class DecodeError(ValueError):
    pass


class BadMagic(DecodeError):
    pass


class BadVersion(DecodeError):
    pass


class BadLength(DecodeError):
    pass


class SfnOutOfRange(DecodeError):
    pass


@dataclass(frozen=True)
class SyncTuple:
    sfn: int
    t_tsn_ns: int

    def __post_init__(self) -> None:
        if not 0 <= self.sfn <= 1023:
            raise ValueError(f"sfn out of range: {self.sfn}")
        if not -(1 << 63) <= self.t_tsn_ns < 1 << 63:
            raise ValueError("t_tsn_ns does not fit in int64")


def encode(tup: SyncTuple) -> bytes:
    return _LAYOUT.pack(MAGIC, VERSION, FLAGS, DSM_HEADER, tup.sfn, tup.t_tsn_ns)


def decode(data: bytes) -> SyncTuple:
    """Parse a NetworkMessage; raises a :class:`DecodeError` subclass on bad input."""
    if len(data) != MESSAGE_LEN:
        raise BadLength(f"expected {MESSAGE_LEN} bytes, got {len(data)}")
    magic, version, _flags, dsm_header, sfn, t_tsn = _LAYOUT.unpack(data)
    if magic != MAGIC:
        raise BadMagic(magic.hex())
    if version != VERSION:
        raise BadVersion(version)
    if dsm_header != DSM_HEADER:
        raise DecodeError(f"unsupported DataSetMessage header 0x{dsm_header:02x}")
    if sfn > 1023:
        raise SfnOutOfRange(sfn)
    return SyncTuple(sfn, t_tsn)


def multicast_publish(sim: Simulator, publisher: str, msg_bytes: bytes, group: Iterable[str]) -> int:
    """Deliver one copy per subscriber, each over its own link from the publisher.

    Returns the number of deliveries scheduled.
    """
    n = 0
    for subscriber in group:
        sim.transmit(publisher, subscriber, msg_bytes)
        n += 1
    return n
