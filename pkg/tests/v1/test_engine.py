import numpy as np
import pytest

from twtsim.v1.engine import (
    Event,
    EventKind,
    RngRegistry,
    RngStream,
    SchedulingError,
    Simulator,
    StreamPurpose,
    stream_id,
)


def _recording_simulator(seed=0):
    simulator = Simulator(seed)
    delivered = []

    def _record(event):
        delivered.append((simulator.now, event.payload))

    for kind in EventKind:
        simulator.register(kind, _record)

    return simulator, delivered


def test_same_time_events_keep_insertion_order():
    simulator, delivered = _recording_simulator()

    simulator.schedule_at(100, EventKind.TIMER, "A")
    simulator.schedule_at(100, EventKind.ARRIVAL, "B")
    simulator.schedule_at(99, EventKind.TIMER, "C")

    assert simulator.run(1000) == (3, 1000)
    assert delivered == [(99, "C"), (100, "A"), (100, "B")]


def test_event_at_now_precedes_next_microsecond():
    simulator, delivered = _recording_simulator()

    simulator.schedule_at(1, EventKind.TIMER, "later")
    simulator.schedule_at(0, EventKind.TIMER, "now")
    simulator.run(10)

    assert [payload for _, payload in delivered] == ["now", "later"]


def test_scheduling_in_the_past_is_rejected():
    simulator, _ = _recording_simulator()
    simulator.run(500)

    with pytest.raises(SchedulingError):
        simulator.schedule(Event(499, EventKind.TIMER))

    with pytest.raises(SchedulingError):
        simulator.run(10)


def test_cancel():
    simulator, delivered = _recording_simulator()

    kept = simulator.schedule_at(10, EventKind.TIMER, "kept")
    dropped = simulator.schedule_at(20, EventKind.TIMER, "dropped")

    assert simulator.cancel(dropped)
    assert not simulator.cancel(dropped)
    assert not simulator.pending(dropped)

    simulator.run(100)

    assert delivered == [(10, "kept")]
    assert not simulator.cancel(kept)
    assert not simulator.cancel(None)


def test_run_horizon():
    simulator, delivered = _recording_simulator()

    assert simulator.run(10 ** 6) == (0, 10 ** 6)

    for t in (10 ** 6 + 1, 10 ** 6 + 2, 10 ** 6 + 3, 3 * 10 ** 6):
        simulator.schedule_at(t, EventKind.TIMER, t)

    assert simulator.run(2 * 10 ** 6) == (3, 2 * 10 ** 6)
    assert len(delivered) == 3


def test_handlers_may_schedule_at_the_current_time():
    simulator = Simulator()
    times = []

    def _chain(event):
        times.append(simulator.now)
        if event.payload < 3:
            simulator.schedule_at(
                simulator.now, EventKind.TIMER, event.payload + 1
            )

    simulator.register(EventKind.TIMER, _chain)
    simulator.schedule_at(5, EventKind.TIMER, 0)
    simulator.run(5)

    assert times == [5, 5, 5, 5]


def test_trace_digest_is_deterministic():
    digests = []

    for _ in range(2):
        simulator, _ = _recording_simulator()
        for t in (30, 10, 10, 20):
            simulator.schedule_at(t, EventKind.ARRIVAL)
        simulator.run(100)
        digests.append(simulator.trace_digest)

    assert digests[0] == digests[1]

    other, _ = _recording_simulator()
    other.schedule_at(11, EventKind.ARRIVAL)
    other.run(100)

    assert other.trace_digest != digests[0]


def test_rng_streams_are_reproducible_and_independent():
    first = RngStream(seed=42, stream_id=3).generator().random(5)
    again = RngStream(seed=42, stream_id=3).generator().random(5)
    other = RngStream(seed=42, stream_id=4).generator().random(5)

    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)

    with pytest.raises(ValueError):
        RngStream(seed=-1, stream_id=0).generator()


def test_stream_ids_are_distinct_per_station_and_purpose():
    ids = {
        stream_id(purpose, station)
        for purpose in StreamPurpose
        for station in [None] + list(range(20))
    }

    assert len(ids) == len(StreamPurpose) * 21


def test_registry_returns_one_generator_per_stream():
    registry = RngRegistry(seed=5)

    backoff = registry.stream(StreamPurpose.BACKOFF, 1)

    assert registry.stream(StreamPurpose.BACKOFF, 1) is backoff
    assert registry.stream(StreamPurpose.BACKOFF, 2) is not backoff
