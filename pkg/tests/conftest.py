from __future__ import annotations

import pytest

from qprofile.circuit import QaoaParams, build_qaoa
from qprofile.cluster import ClusterService, LatencyProfile, Topology
from qprofile.compiler import compile as compile_job
from qprofile.problem import generate_instance

FIXED_PARAMS = QaoaParams(p=2, gammas=(0.7, 0.7), betas=(0.4, 0.4))


@pytest.fixture(scope="session")
def zeroed_service():
    """Latency-free cluster on an ephemeral loopback port, shared per session."""
    service = ClusterService(LatencyProfile.zeroed(), Topology(), noise_seed=7)
    host, port = service.start()
    yield service, host, port
    service.shutdown()


@pytest.fixture()
def k4_job():
    g = generate_instance(4, 0)
    return compile_job(build_qaoa(g, FIXED_PARAMS), 1000, "passive")
