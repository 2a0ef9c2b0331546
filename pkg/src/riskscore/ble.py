"""Risk-score advertising payload and RSSI bucketing.

Wire layout (27 bytes, fits the 31-byte advertising budget)::

    0..15   service UUID (16 raw bytes)
    16..21  b"r" + risk as "dd.dd"
    22..26  b"w" + weight as "d.dd"

Values are rounded half away from zero on their shortest decimal
representation, so ``0.955`` encodes as ``"00.96"``.
"""
from __future__ import annotations

import re
import uuid as _uuid
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation

import numpy as np

from .errors import (
    EncodeRangeError,
    ForeignBeaconError,
    PayloadCorruptError,
    PayloadLengthError,
)

SERVICE_UUID = _uuid.UUID("5f1b2c3a-6e2d-4c1f-9a77-7269736b7363").bytes
PAYLOAD_LENGTH = 27
ADV_BUDGET = 31

_RISK = slice(16, 22)
_WEIGHT = slice(22, 27)
_RISK_RE = re.compile(rb"r(\d\d\.\d\d)\Z")
_WEIGHT_RE = re.compile(rb"w(\d\.\d\d)\Z")
_CENT = Decimal("0.01")

# (lower bound exclusive, value), checked top-down; anything else maps to 0.0
RSSI_TABLE = ((-55.0, 0.8), (-63.0, 0.5), (-75.0, 0.1))


def round2(x: float) -> Decimal:
    """Round to two decimals, half away from zero."""
    try:
        return Decimal(repr(float(x))).quantize(_CENT, rounding=ROUND_HALF_UP)
    except (InvalidOperation, ValueError):
        raise EncodeRangeError(f"cannot round {x!r}") from None


def encode(risk: float, weight: float, uuid: bytes = SERVICE_UUID) -> bytes:
    if len(uuid) != 16:
        raise ValueError("service UUID must be 16 bytes")
    if not risk >= 0.0:
        raise EncodeRangeError(f"risk {risk!r} must be non-negative")
    if not 0.0 <= weight <= 1.0:
        raise EncodeRangeError(f"weight {weight!r} outside [0, 1]")
    rr = round2(risk)
    if rr >= 100:
        raise EncodeRangeError(f"risk {risk!r} does not fit the 5-character field")
    ww = round2(weight)
    payload = bytes(uuid) + f"r{rr:05.2f}w{ww:04.2f}".encode("ascii")
    assert len(payload) == PAYLOAD_LENGTH
    return payload


def decode(payload: bytes, uuid: bytes = SERVICE_UUID) -> tuple[float, float]:
    """Return (risk, weight) or raise a :class:`CodecError` subclass.

    A :class:`ForeignBeaconError` means the frame belongs to some other
    service and should be ignored.
    """
    payload = bytes(payload)
    if len(payload) != PAYLOAD_LENGTH:
        raise PayloadLengthError(f"expected {PAYLOAD_LENGTH} bytes, got {len(payload)}")
    if payload[:16] != uuid:
        raise ForeignBeaconError(payload[:16].hex())
    m_risk = _RISK_RE.match(payload[_RISK])
    m_weight = _WEIGHT_RE.match(payload[_WEIGHT])
    if m_risk is None or m_weight is None:
        raise PayloadCorruptError(f"bad numeric fields {payload[16:]!r}")
    risk = float(m_risk.group(1))
    weight = float(m_weight.group(1))
    if weight > 1.0:
        raise PayloadCorruptError(f"weight {weight} above 1")
    return risk, weight


def rssi_to_weight(rssi: float) -> float:
    for bound, value in RSSI_TABLE:
        if rssi > bound:
            return value
    return 0.0


def rssi_to_weight_array(rssi: np.ndarray) -> np.ndarray:
    rssi = np.asarray(rssi, dtype=float)
    return np.select(
        [rssi > -55.0, rssi > -63.0, rssi > -75.0], [0.8, 0.5, 0.1], default=0.0
    )
