import numpy as np
import pytest

from twtsim.v1.twt.agreements import (
    BroadcastInfo,
    SetupCommand,
    TwtMessage,
    TwtParams,
    request,
    response,
)
from twtsim.v1.twt.element import (
    BROADCAST_LENGTH,
    ELEMENT_ID,
    ElementDecodeError,
    ElementEncodeError,
    decode_element,
    encode_element,
    from_hex,
    to_hex,
)


def _params(**kwargs):
    defaults = dict(
        target_wake_time=123_456,
        wake_interval=20_000,
        min_wake_duration=10_240,
        channel=36,
        protection=True,
        trigger_enabled=True,
        implicit=True,
        announced=True,
    )
    defaults.update(kwargs)

    return TwtParams(**defaults)


def test_accept_with_every_flag_round_trips():
    message = response(
        SetupCommand.ACCEPT,
        _params(),
        broadcast=BroadcastInfo(3, 204_800, 2),
        agreement_id=7,
    )
    data = encode_element(message)

    assert data[0] == ELEMENT_ID
    assert len(data) == 2 + BROADCAST_LENGTH
    assert decode_element(data) == message


def test_layout_of_bare_request():
    data = encode_element(request(SetupCommand.REQUEST, agreement_id=2))

    assert data == bytes([216, 2, 0x80, 0x00])


def test_layout_of_parameters():
    message = request(
        SetupCommand.DEMAND,
        _params(
            target_wake_time=1,
            wake_interval=2,
            min_wake_duration=512,
            channel=4,
            announced=False,
            trigger_enabled=False,
            implicit=False,
        ),
    )

    assert to_hex(message) == (
        "d8"  # element id
        "12"  # 18 bytes follow
        "2200"  # demand, unannounced
        "0100000000000000"
        "02000000"
        "0200"
        "04"
        "01"
    )


def _random_message(rng):
    command = list(SetupCommand)[int(rng.integers(len(SetupCommand)))]
    without_params = command == SetupCommand.REJECT or (
        command == SetupCommand.REQUEST and rng.integers(2)
    )
    builder = (
        request
        if command
        in (SetupCommand.REQUEST, SetupCommand.SUGGEST, SetupCommand.DEMAND)
        else response
    )

    if without_params:
        return builder(command, agreement_id=int(rng.integers(8)))

    implicit = bool(rng.integers(2))
    params = TwtParams(
        target_wake_time=int(rng.integers(0, 2 ** 63)),
        wake_interval=int(rng.integers(1 if implicit else 0, 2 ** 32)),
        min_wake_duration=256 * int(rng.integers(1, 2 ** 16)),
        channel=int(rng.integers(256)),
        protection=bool(rng.integers(2)),
        trigger_enabled=bool(rng.integers(2)),
        implicit=implicit,
        announced=bool(rng.integers(2)),
    )
    broadcast = (
        BroadcastInfo(
            session_id=int(rng.integers(256)),
            next_target_beacon=int(rng.integers(0, 2 ** 63)),
            listen_interval=int(rng.integers(1, 2 ** 16)),
        )
        if rng.integers(2)
        else None
    )

    return builder(
        command,
        params,
        broadcast=broadcast,
        agreement_id=int(rng.integers(8)),
    )


def test_random_messages_round_trip_and_reject_truncation():
    rng = np.random.default_rng(99)

    for _ in range(10 ** 4):
        message = _random_message(rng)
        data = encode_element(message)

        assert decode_element(data) == message

        cut = int(rng.integers(len(data)))
        with pytest.raises(ElementDecodeError):
            decode_element(data[:cut])


def test_every_truncation_is_rejected():
    broadcast = BroadcastInfo(0, 0, 1)
    message = response(SetupCommand.ACCEPT, _params(), broadcast=broadcast)
    data = encode_element(message)

    for cut in range(len(data)):
        with pytest.raises(ElementDecodeError):
            decode_element(data[:cut])


def test_undefined_setup_command():
    data = bytearray(encode_element(response(SetupCommand.REJECT)))
    data[2] = (data[2] & ~0b111) | 3

    with pytest.raises(ElementDecodeError) as error:
        decode_element(bytes(data))

    assert error.value.field == "setup_command"


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d.__setitem__(0, 221), "element_id"),
        (lambda d: d.__setitem__(1, 40), "length"),
        (lambda d: d.__setitem__(3, 0x80), "reserved"),
        (lambda d: d.__setitem__(19, 0x04), "flags"),
        (lambda d: d.__setitem__(19, 0x03), "flags"),
        (lambda d: d.__setitem__(16, 0) or d.__setitem__(17, 0),
         "min_wake_duration"),
    ],
)
def test_decode_names_the_offending_field(mutate, field):
    data = bytearray(encode_element(request(SetupCommand.SUGGEST, _params())))
    mutate(data)

    with pytest.raises(ElementDecodeError) as error:
        decode_element(bytes(data))

    assert error.value.field == field


def test_implicit_without_interval():
    aperiodic = _params(implicit=False, wake_interval=0)
    data = bytearray(encode_element(request(SetupCommand.SUGGEST, aperiodic)))
    data[2] |= 1 << 4

    with pytest.raises(ElementDecodeError) as error:
        decode_element(bytes(data))

    assert error.value.field == "wake_interval"


def test_arbitrary_bytes_never_crash():
    rng = np.random.default_rng(7)

    for _ in range(5000):
        size = int(rng.integers(0, 40))
        data = rng.bytes(size)

        if rng.integers(2) and size >= 4:
            data = bytes([ELEMENT_ID, size - 2]) + data[2:]

        try:
            assert isinstance(decode_element(data), TwtMessage)
        except ElementDecodeError as e:
            assert e.field


@pytest.mark.parametrize(
    "message",
    [
        response(SetupCommand.ACCEPT, _params(min_wake_duration=300)),
        response(SetupCommand.ACCEPT, _params(channel=256)),
        request(SetupCommand.DEMAND),
        response(SetupCommand.ACCEPT, _params(),
                 broadcast=BroadcastInfo(0, 0, 0)),
    ],
)
def test_encode_rejects_invalid_messages(message):
    with pytest.raises(ElementEncodeError):
        encode_element(message)


def test_hex_helpers():
    message = request(SetupCommand.SUGGEST, _params())

    assert from_hex(to_hex(message)) == message
    assert from_hex("  " + to_hex(message).upper() + "\n") == message

    with pytest.raises(ElementDecodeError) as error:
        from_hex("zz")

    assert error.value.field == "hex"
