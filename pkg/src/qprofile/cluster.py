"""Virtual control-cluster service with configurable command latencies.

Speaks the length-prefixed JSON protocol from `wire`. The cluster is a set
of control and readout modules, each holding six sequencers that step
through idle -> armed -> running -> done -> idle. Command handling sleeps
for configurable durations so host tooling can be profiled against
realistic stack behavior without hardware.

Commands:

    {"cmd": "stop"}
    {"cmd": "prepare", "module": M, "seq": S, "program": <base64>, "meta": {...}}
    {"cmd": "start"}
    {"cmd": "status"}
    {"cmd": "retrieve", "module": M}

Replies are {"ok": true, ...} or {"ok": false, "error": code, "msg": ...}
with error codes bad_frame, bad_state, unknown_target. Malformed JSON in a
well-delimited frame gets a bad_frame reply and the connection stays open.
"""

from __future__ import annotations

import base64
import binascii
import json
import signal
import socket
import socketserver
import threading
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import wire
from .util import mix_seed

SEQUENCER_STATES = ("idle", "armed", "running", "done")


@dataclass(frozen=True)
class LatencyProfile:
    """Server-side handling delays. Defaults are calibrated to a reference
    rack-mounted cluster reached over gigabit Ethernet.

    The serial prepare component is spent under a cluster-wide lock, the
    concurrent component (plus the per-byte transfer term) outside it.
    dilation scales only the slept schedule execution time; 0 means the
    schedule is accounted nominally but not slept.
    """

    stop_ms: float = 19.5
    start_ms: float = 57.11
    retrieve_ms: float = 58.9
    prepare_serial_ms: float = 6.86
    prepare_concurrent_ms: float = 19.04
    prepare_per_byte_ns: float = 8.0
    done_finalize_ms: float = 56.3
    dilation: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    @classmethod
    def zeroed(cls, dilation: float = 0.0) -> "LatencyProfile":
        return cls(
            stop_ms=0.0,
            start_ms=0.0,
            retrieve_ms=0.0,
            prepare_serial_ms=0.0,
            prepare_concurrent_ms=0.0,
            prepare_per_byte_ns=0.0,
            done_finalize_ms=0.0,
            dilation=dilation,
        )

    def prepare_ms(self, program_bytes: int) -> float:
        return (
            self.prepare_serial_ms
            + self.prepare_concurrent_ms
            + program_bytes * self.prepare_per_byte_ns * 1e-6
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "LatencyProfile":
        return cls(**raw)


@dataclass(frozen=True)
class Topology:
    control_modules: int = 3
    readout_modules: int = 3
    sequencers_per_module: int = 6

    def __post_init__(self):
        if min(self.control_modules, self.readout_modules, self.sequencers_per_module) < 1:
            raise ValueError("topology dimensions must be positive")

    def module_ids(self) -> tuple[str, ...]:
        return tuple(
            [f"cm{i}" for i in range(self.control_modules)]
            + [f"rm{i}" for i in range(self.readout_modules)]
        )

    @classmethod
    def for_qubits(cls, n: int, sequencers_per_module: int = 6) -> "Topology":
        modules = max(1, -(-n // sequencers_per_module))
        return cls(
            control_modules=modules,
            readout_modules=modules,
            sequencers_per_module=sequencers_per_module,
        )


def load_cluster_config(path: str) -> tuple[LatencyProfile, Topology]:
    """Read {"latency": {...}, "topology": {...}} from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    profile = LatencyProfile.from_dict(raw.get("latency", {}))
    topology = Topology(**raw.get("topology", {}))
    return profile, topology


class _Sequencer:
    __slots__ = ("status", "program", "meta")

    def __init__(self):
        self.status = "idle"
        self.program = b""
        self.meta: dict = {}


class ClusterState:
    """Shared sequencer state. All mutation happens under one lock; the
    running -> done edge is evaluated lazily against the run clock."""

    def __init__(self, topology: Topology, profile: LatencyProfile):
        self.topology = topology
        self.profile = profile
        self.lock = threading.Lock()
        self.prepare_gate = threading.Lock()  # serializes the serial component
        self.seqs: dict[tuple[str, int], _Sequencer] = {}
        for m in topology.module_ids():
            for s in range(topology.sequencers_per_module):
                self.seqs[(m, s)] = _Sequencer()
        self.started_at: float | None = None
        self.done_at: float | None = None
        self.schedule_s = 0.0
        self.start_pending = False

    def has_module(self, module: str) -> bool:
        return any(m == module for m, _ in self.seqs)

    def _refresh_locked(self):
        if self.done_at is not None and time.monotonic() >= self.done_at:
            for seq in self.seqs.values():
                if seq.status == "running":
                    seq.status = "done"

    def phase_locked(self) -> str:
        self._refresh_locked()
        statuses = {s.status for s in self.seqs.values()}
        for phase in ("running", "done", "armed"):
            if phase in statuses:
                return phase
        return "idle"


class ClusterService:
    """Embeddable threaded TCP service around a ClusterState."""

    def __init__(
        self,
        profile: LatencyProfile | None = None,
        topology: Topology | None = None,
        noise_seed: int | None = None,
    ):
        self.profile = profile if profile is not None else LatencyProfile()
        self.topology = topology if topology is not None else Topology()
        self.state = ClusterState(self.topology, self.profile)
        seed = noise_seed if noise_seed is not None else time.time_ns()
        self._noise = np.random.Generator(np.random.Philox(key=mix_seed(seed, 0xAC)))
        self._noise_lock = threading.Lock()
        self._server: socketserver.ThreadingTCPServer | None = None
        self._thread: threading.Thread | None = None

    # -- command handlers ---------------------------------------------------

    def handle_stop(self) -> dict:
        time.sleep(self.profile.stop_ms * 1e-3)
        with self.state.lock:
            for seq in self.state.seqs.values():
                seq.status = "idle"
            self.state.started_at = None
            self.state.done_at = None
            self.state.schedule_s = 0.0
            self.state.start_pending = False
        return {"ok": True, "state": "idle"}

    def handle_prepare(self, module: str, seq_id, program_b64, meta) -> dict:
        if not isinstance(module, str) or not isinstance(seq_id, int):
            return _err("bad_frame", "prepare needs string module and integer seq")
        key = (module, seq_id)
        if key not in self.state.seqs:
            return _err("unknown_target", f"no sequencer {seq_id} on module {module!r}")
        if not isinstance(program_b64, str):
            return _err("bad_frame", "program must be base64 text")
        try:
            program = base64.b64decode(program_b64.encode("ascii"), validate=True)
        except (binascii.Error, ValueError):
            return _err("bad_frame", "program is not valid base64")
        meta = meta if isinstance(meta, dict) else {}

        with self.state.lock:
            seq = self.state.seqs[key]
            if seq.status != "idle":
                return _err("bad_state", f"sequencer {key} is {seq.status}, not idle")

        with self.state.prepare_gate:
            time.sleep(self.profile.prepare_serial_ms * 1e-3)
        time.sleep(
            self.profile.prepare_concurrent_ms * 1e-3
            + len(program) * self.profile.prepare_per_byte_ns * 1e-9
        )

        with self.state.lock:
            seq = self.state.seqs[key]
            if seq.status != "idle":
                return _err("bad_state", f"sequencer {key} is {seq.status}, not idle")
            seq.status = "armed"
            seq.program = program
            seq.meta = dict(meta)
        return {"ok": True, "module": module, "seq": seq_id, "bytes": len(program)}

    def handle_start(self) -> dict:
        with self.state.lock:
            phase = self.state.phase_locked()
            if self.state.start_pending or phase == "running":
                return _err("bad_state", "schedule already running")
            if phase != "armed":
                return _err("bad_state", f"nothing armed to start (cluster {phase})")
            self.state.start_pending = True
        time.sleep(self.profile.start_ms * 1e-3)
        with self.state.lock:
            self.state.start_pending = False
            armed = [s for s in self.state.seqs.values() if s.status == "armed"]
            if not armed:  # a stop raced the start sleep
                return _err("bad_state", "schedule was stopped before start completed")
            schedule_s = max(float(s.meta.get("schedule_s", 0.0)) for s in armed)
            now = time.monotonic()
            for s in armed:
                s.status = "running"
            self.state.started_at = now
            self.state.schedule_s = schedule_s
            self.state.done_at = (
                now
                + schedule_s * self.profile.dilation
                + self.profile.done_finalize_ms * 1e-3
            )
        return {"ok": True, "state": "running", "schedule_s": schedule_s}

    def handle_status(self) -> dict:
        with self.state.lock:
            phase = self.state.phase_locked()
            elapsed = (
                time.monotonic() - self.state.started_at
                if self.state.started_at is not None
                else 0.0
            )
            return {
                "ok": True,
                "state": phase,
                "elapsed_s": elapsed,
                "schedule_s": self.state.schedule_s,
            }

    def handle_retrieve(self, module: str) -> dict:
        if not isinstance(module, str) or not self.state.has_module(module):
            return _err("unknown_target", f"no module {module!r}")
        time.sleep(self.profile.retrieve_ms * 1e-3)
        with self.state.lock:
            phase = self.state.phase_locked()
            if phase != "done":
                return _err("bad_state", f"cluster is {phase}, not done")
            targets = [
                (key, seq)
                for key, seq in sorted(self.state.seqs.items())
                if key[0] == module and seq.meta
            ]
            bits: dict[str, list[int]] = {}
            raw: dict[str, list[float]] = {}
            shots = 0
            with self._noise_lock:
                for _, seq in targets:
                    qubit = seq.meta.get("qubit")
                    n_shots = int(seq.meta.get("shots", 0))
                    if qubit is None or n_shots <= 0:
                        continue
                    shots = max(shots, n_shots)
                    draw = self._noise.integers(0, 2, size=n_shots)
                    bits[str(qubit)] = [int(b) for b in draw]
                    iq = self._noise.normal(0.0, 1.0, size=2)
                    raw[str(qubit)] = [round(float(iq[0]), 6), round(float(iq[1]), 6)]
        return {"ok": True, "module": module, "shots": shots, "bits": bits, "raw": raw}

    # -- dispatch -----------------------------------------------------------

    def dispatch(self, request) -> dict:
        if not isinstance(request, dict):
            return _err("bad_frame", "request must be a JSON object")
        cmd = request.get("cmd")
        if cmd == "stop":
            return self.handle_stop()
        if cmd == "prepare":
            return self.handle_prepare(
                request.get("module"),
                request.get("seq"),
                request.get("program"),
                request.get("meta"),
            )
        if cmd == "start":
            return self.handle_start()
        if cmd == "status":
            return self.handle_status()
        if cmd == "retrieve":
            return self.handle_retrieve(request.get("module"))
        return _err("bad_frame", f"unknown command {cmd!r}")

    # -- lifecycle ----------------------------------------------------------

    def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        if self._server is not None:
            raise RuntimeError("service already started")
        service = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                sock = self.request
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                while True:
                    try:
                        request = wire.recv_frame(sock)
                    except json.JSONDecodeError:
                        try:
                            wire.send_frame(sock, _err("bad_frame", "payload is not valid JSON"))
                            continue
                        except OSError:
                            return
                    except (wire.FrameError, OSError):
                        return
                    if request is None:
                        return
                    reply = service.dispatch(request)
                    try:
                        wire.send_frame(sock, reply)
                    except OSError:
                        return

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True
            # absorb parallel-prepare connection bursts without SYN drops
            request_queue_size = 128

        self._server = Server((host, port), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self._server.server_address

    @property
    def address(self) -> tuple[str, int]:
        if self._server is None:
            raise RuntimeError("service not started")
        return self._server.server_address

    def shutdown(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
            self._thread = None

    def __enter__(self) -> "ClusterService":
        self.start()
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False


def _err(code: str, msg: str) -> dict:
    return {"ok": False, "error": code, "msg": msg}


def serve(
    bind: str = "127.0.0.1:7780",
    profile: LatencyProfile | None = None,
    topology: Topology | None = None,
) -> None:
    """Run a cluster service until SIGINT/SIGTERM. CLI entry point."""
    host, _, port_text = bind.partition(":")
    service = ClusterService(profile=profile, topology=topology)
    host_out, port_out = service.start(host or "127.0.0.1", int(port_text or 0))
    print(f"cluster listening on {host_out}:{port_out}", flush=True)

    stop_event = threading.Event()

    def _stop(signum, frame):
        stop_event.set()

    signal.signal(signal.SIGINT, _stop)
    signal.signal(signal.SIGTERM, _stop)
    try:
        while not stop_event.wait(0.2):
            pass
    finally:
        service.shutdown()
        print("cluster stopped", flush=True)
