"""
Canonical byte layout of the TWT element exchanged in setup frames.

Multi-byte fields are little-endian.

    offset  size  field
    0       1     element id (216)
    1       1     length of what follows
    2       2     request type:
                    bits 0-2   setup command
                    bit  3     trigger
                    bit  4     implicit
                    bit  5     flow type (1 = unannounced)
                    bits 6-8   agreement id
                    bits 9-15  reserved, zero
    4       8     target wake time, us            \
    12      4     wake interval, us                |  absent for Reject and
    16      2     min wake duration, 256 us units |  for a Request without
    18      1     channel                          |  preference
    19      1     flags: bit 0 protection,        /
                         bit 1 broadcast, others zero
    20      1     broadcast session id            \
    21      8     next target beacon, us           |  only with the
    29      2     listen interval, beacons        /   broadcast flag

This is a simulator-internal format, not the over-the-air encoding.
"""

import struct
from typing import Optional

from .agreements import (
    MAX_AGREEMENTS,
    MIN_WAKE_DURATION_US,
    REQUEST_COMMANDS,
    BroadcastInfo,
    Direction,
    SetupCommand,
    TwtMessage,
    TwtParams,
)


ELEMENT_ID = 216

SETUP_COMMAND_CODES = {
    SetupCommand.REQUEST: 0,
    SetupCommand.SUGGEST: 1,
    SetupCommand.DEMAND: 2,
    SetupCommand.ACCEPT: 4,
    SetupCommand.ALTERNATE: 5,
    SetupCommand.DICTATE: 6,
    SetupCommand.REJECT: 7,
}
SETUP_COMMANDS = {
    code: command for command, code in SETUP_COMMAND_CODES.items()
}

_header = struct.Struct("<BBH")
_params = struct.Struct("<QIHBB")
_broadcast = struct.Struct("<BQH")

BARE_LENGTH = _header.size - 2
PARAMS_LENGTH = BARE_LENGTH + _params.size
BROADCAST_LENGTH = PARAMS_LENGTH + _broadcast.size

TRIGGER_BIT = 1 << 3
IMPLICIT_BIT = 1 << 4
UNANNOUNCED_BIT = 1 << 5
PROTECTION_FLAG = 1 << 0
BROADCAST_FLAG = 1 << 1


class ElementEncodeError(ValueError):
    pass


class ElementDecodeError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _check_range(field: str, value: int, upper: int) -> None:
    if not 0 <= value < upper:
        raise ElementEncodeError(f"{field}={value} out of 0..{upper - 1}")


def encode_element(message: TwtMessage) -> bytes:
    errors = message.violations()
    if errors:
        raise ElementEncodeError("; ".join(errors))

    params = message.params
    broadcast = message.broadcast

    if broadcast is not None and params is None:
        raise ElementEncodeError("broadcast info needs parameters")

    request_type = SETUP_COMMAND_CODES[message.command]
    request_type |= message.agreement_id << 6

    body = b""

    if params is not None:
        if params.min_wake_duration % MIN_WAKE_DURATION_US:
            raise ElementEncodeError(
                "min_wake_duration must be a multiple of "
                f"{MIN_WAKE_DURATION_US} us"
            )

        units = params.min_wake_duration // MIN_WAKE_DURATION_US
        _check_range("target_wake_time", params.target_wake_time, 2 ** 64)
        _check_range("wake_interval", params.wake_interval, 2 ** 32)
        _check_range("min_wake_duration", units, 2 ** 16)
        _check_range("channel", params.channel, 2 ** 8)

        request_type |= TRIGGER_BIT if params.trigger_enabled else 0
        request_type |= IMPLICIT_BIT if params.implicit else 0
        request_type |= 0 if params.announced else UNANNOUNCED_BIT

        flags = PROTECTION_FLAG if params.protection else 0
        flags |= BROADCAST_FLAG if broadcast is not None else 0

        body += _params.pack(
            params.target_wake_time,
            params.wake_interval,
            units,
            params.channel,
            flags,
        )

    if broadcast is not None:
        _check_range("session_id", broadcast.session_id, 2 ** 8)
        _check_range(
            "next_target_beacon", broadcast.next_target_beacon, 2 ** 64
        )
        _check_range("listen_interval", broadcast.listen_interval, 2 ** 16)
        if broadcast.listen_interval == 0:
            raise ElementEncodeError("listen_interval must be at least 1")

        body += _broadcast.pack(
            broadcast.session_id,
            broadcast.next_target_beacon,
            broadcast.listen_interval,
        )

    header = _header.pack(ELEMENT_ID, BARE_LENGTH + len(body), request_type)

    return header + body


def decode_element(data: bytes) -> TwtMessage:
    """Parse one element; malformed input raises `ElementDecodeError`."""

    data = bytes(data)

    if len(data) < _header.size:
        raise ElementDecodeError("header", f"truncated at {len(data)} bytes")

    element_id, length, request_type = _header.unpack_from(data, 0)

    if element_id != ELEMENT_ID:
        raise ElementDecodeError(
            "element_id", f"expected {ELEMENT_ID}, got {element_id}"
        )

    if length != len(data) - 2:
        raise ElementDecodeError(
            "length", f"declares {length} bytes, {len(data) - 2} present"
        )

    if length not in (BARE_LENGTH, PARAMS_LENGTH, BROADCAST_LENGTH):
        raise ElementDecodeError("length", f"unexpected body size {length}")

    code = request_type & 0b111
    if code not in SETUP_COMMANDS:
        raise ElementDecodeError("setup_command", f"undefined value {code}")

    if request_type >> 9:
        raise ElementDecodeError("reserved", "reserved bits must be zero")

    command = SETUP_COMMANDS[code]
    agreement_id = (request_type >> 6) & (MAX_AGREEMENTS - 1)
    direction = (
        Direction.REQUEST
        if command in REQUEST_COMMANDS
        else Direction.RESPONSE
    )
    mode_bits = request_type & (TRIGGER_BIT | IMPLICIT_BIT | UNANNOUNCED_BIT)

    params: Optional[TwtParams] = None
    broadcast: Optional[BroadcastInfo] = None

    if length == BARE_LENGTH:
        if mode_bits:
            raise ElementDecodeError(
                "request_type", "mode bits set without parameters"
            )
    else:
        twt, interval, units, channel, flags = _params.unpack_from(
            data, _header.size
        )

        if flags & ~(PROTECTION_FLAG | BROADCAST_FLAG):
            raise ElementDecodeError("flags", "reserved flag bits set")

        if bool(flags & BROADCAST_FLAG) != (length == BROADCAST_LENGTH):
            raise ElementDecodeError(
                "flags", "broadcast flag disagrees with the length"
            )

        params = TwtParams(
            target_wake_time=twt,
            wake_interval=interval,
            min_wake_duration=units * MIN_WAKE_DURATION_US,
            channel=channel,
            protection=bool(flags & PROTECTION_FLAG),
            trigger_enabled=bool(request_type & TRIGGER_BIT),
            implicit=bool(request_type & IMPLICIT_BIT),
            announced=not request_type & UNANNOUNCED_BIT,
        )

        if units == 0:
            raise ElementDecodeError("min_wake_duration", "zero duration")

        if params.implicit and interval == 0:
            raise ElementDecodeError(
                "wake_interval", "implicit agreement without interval"
            )

        if length == BROADCAST_LENGTH:
            session_id, next_beacon, listen = _broadcast.unpack_from(
                data, _header.size + _params.size
            )

            if listen == 0:
                raise ElementDecodeError("listen_interval", "must be >= 1")

            broadcast = BroadcastInfo(session_id, next_beacon, listen)

    message = TwtMessage(
        direction=direction,
        command=command,
        params=params,
        broadcast=broadcast,
        agreement_id=agreement_id,
    )

    errors = message.violations()
    if errors:
        raise ElementDecodeError("setup_command", "; ".join(errors))

    return message


def to_hex(message: TwtMessage) -> str:
    return encode_element(message).hex()


def from_hex(text: str) -> TwtMessage:
    try:
        data = bytes.fromhex(text.strip())
    except ValueError as e:
        raise ElementDecodeError("hex", str(e))

    return decode_element(data)
