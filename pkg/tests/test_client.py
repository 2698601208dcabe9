from __future__ import annotations

import socket

import pytest

from qprofile.circuit import QaoaParams, build_qaoa
from qprofile.client import ClusterClient, ProtocolError, TransportError
from qprofile.compiler import compile as compile_job
from qprofile.problem import generate_instance

PARAMS = QaoaParams(p=2, gammas=(0.7, 0.7), betas=(0.4, 0.4))


def _job(n: int, shots: int = 1000):
    return compile_job(build_qaoa(generate_instance(n, 0), PARAMS), shots, "passive")


def test_full_iteration_round_trip(zeroed_service, k4_job):
    _, host, port = zeroed_service
    with ClusterClient(host, port) as client:
        acquisition, timings = client.run_iteration(k4_job)
    assert acquisition.shots == 1000
    assert sorted(acquisition.bits) == [0, 1, 2, 3]
    assert all(len(bits) == 1000 for bits in acquisition.bits.values())
    assert all(len(iq) == 2 for iq in acquisition.raw.values())
    assert timings.schedule_nominal_s == pytest.approx(k4_job.schedule_seconds)
    assert timings.prepare_mode == "sequential"
    assert timings.reset_mode == "passive"
    # a latency-free iteration is dominated by round trips alone
    assert timings.wall_total_s < 0.05


def test_phase_timings_cover_the_wall_clock(zeroed_service, k4_job):
    _, host, port = zeroed_service
    with ClusterClient(host, port) as client:
        _, t = client.run_iteration(k4_job)
    phase_sum = (
        t.stop_s + t.prepare_s + t.start_s + t.wait_done_wall_s + t.retrieve_s + t.final_stop_s
    )
    assert t.wall_total_s >= phase_sum
    assert t.wall_total_s - phase_sum < 0.005  # no hidden gaps between phases


def test_parallel_prepare_round_trip(zeroed_service, k4_job):
    _, host, port = zeroed_service
    with ClusterClient(host, port) as client:
        acquisition, timings = client.run_iteration(k4_job, prepare_mode="parallel")
        assert timings.prepare_mode == "parallel"
        assert sorted(acquisition.bits) == [0, 1, 2, 3]
        # streams are reused across iterations
        acquisition2, _ = client.run_iteration(k4_job, prepare_mode="parallel")
        assert sorted(acquisition2.bits) == [0, 1, 2, 3]


def test_multi_module_retrieve(zeroed_service):
    _, host, port = zeroed_service
    job = _job(8, shots=50)
    assert job.readout_modules() == ("rm0", "rm1")
    with ClusterClient(host, port) as client:
        acquisition, _ = client.run_iteration(job)
    assert sorted(acquisition.bits) == list(range(8))
    assert len(acquisition.replies) == 2


def test_unknown_prepare_mode_is_rejected(zeroed_service, k4_job):
    _, host, port = zeroed_service
    with ClusterClient(host, port) as client:
        with pytest.raises(ValueError):
            client.prepare(k4_job, "burst")


def test_protocol_error_on_start_without_arming(zeroed_service):
    _, host, port = zeroed_service
    with ClusterClient(host, port) as client:
        client.stop()
        with pytest.raises(ProtocolError) as err:
            client.start()
        assert err.value.code == "bad_state"


def test_transport_error_on_refused_connection():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    _, free_port = probe.getsockname()
    probe.close()
    with pytest.raises(TransportError):
        ClusterClient("127.0.0.1", free_port)
