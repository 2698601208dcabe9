"""Host-side driver for the cluster service.

Runs the per-iteration command sequence stop -> prepare -> start ->
wait-done -> retrieve -> stop against one cluster, timing every phase with
the monotonic clock. Program uploads go either sequentially over the main
connection or in parallel with one dedicated connection per upload stream
(connections are reused across iterations).
"""

from __future__ import annotations

import base64
import json
import socket
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import wire
from .compiler import CompiledJob, ProgramFile

POLL_INTERVAL_S = 0.001
MAX_PARALLEL_STREAMS = 32


class TransportError(Exception):
    """Connection-level failure (refused, closed, timed out)."""


class ProtocolError(Exception):
    """Server replied ok=false."""

    def __init__(self, code: str, msg: str):
        super().__init__(f"{code}: {msg}")
        self.code = code
        self.msg = msg


@dataclass(frozen=True)
class AcquisitionData:
    """Acquisition payloads exactly as retrieved, merged across modules."""

    shots: int
    bits: dict[int, tuple[int, ...]]
    raw: dict[int, tuple[float, ...]]
    replies: tuple[dict, ...]  # verbatim per-module reply objects


@dataclass(frozen=True)
class IterationTimings:
    """Wall durations of one iteration's phases, in seconds."""

    stop_s: float
    prepare_s: float
    start_s: float
    wait_done_wall_s: float
    retrieve_s: float
    final_stop_s: float
    wall_total_s: float
    schedule_nominal_s: float
    prepare_mode: str
    reset_mode: str


class ClusterConnection:
    """One framed TCP connection."""

    def __init__(self, host: str, port: int, timeout_s: float = 10.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock.settimeout(300.0)

    def request(self, obj: dict) -> dict:
        try:
            wire.send_frame(self._sock, obj)
            reply = wire.recv_frame(self._sock)
        except (OSError, wire.FrameError) as exc:
            raise TransportError(f"transport failure during {obj.get('cmd')}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise TransportError(f"undecodable reply to {obj.get('cmd')}") from exc
        if reply is None:
            raise TransportError(f"connection closed during {obj.get('cmd')}")
        if not reply.get("ok", False):
            raise ProtocolError(reply.get("error", "unknown"), reply.get("msg", ""))
        return reply

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


def _prepare_request(f: ProgramFile, job: CompiledJob) -> dict:
    return {
        "cmd": "prepare",
        "module": f.module,
        "seq": f.sequencer,
        "program": base64.b64encode(f.text.encode("utf-8")).decode("ascii"),
        "meta": {
            "qubit": f.qubit,
            "role": f.role,
            "shots": job.shots,
            "schedule_s": job.schedule_seconds,
        },
    }


class ClusterClient:
    """Drives one cluster endpoint through benchmark iterations."""

    def __init__(self, host: str, port: int, wait_timeout_s: float = 120.0):
        self.host = host
        self.port = port
        self.wait_timeout_s = wait_timeout_s
        self._main = ClusterConnection(host, port)
        self._streams: list[ClusterConnection] = []
        self._pool: ThreadPoolExecutor | None = None

    # -- single commands ----------------------------------------------------

    def stop(self) -> dict:
        return self._main.request({"cmd": "stop"})

    def start(self) -> dict:
        return self._main.request({"cmd": "start"})

    def status(self) -> dict:
        return self._main.request({"cmd": "status"})

    def retrieve(self, module: str) -> dict:
        return self._main.request({"cmd": "retrieve", "module": module})

    # -- prepare ------------------------------------------------------------

    def _stream(self, index: int) -> ClusterConnection:
        while len(self._streams) <= index:
            self._streams.append(ClusterConnection(self.host, self.port))
        return self._streams[index]

    def prepare_sequential(self, job: CompiledJob) -> float:
        t0 = time.perf_counter()
        for f in job.files:
            self._main.request(_prepare_request(f, job))
        return time.perf_counter() - t0

    def prepare_parallel(self, job: CompiledJob) -> float:
        """Upload every program file concurrently, one connection each."""
        files = job.files
        workers = min(len(files), MAX_PARALLEL_STREAMS)
        for i in range(workers):
            self._stream(i)  # connect outside the timed window
        if self._pool is None or self._pool._max_workers < workers:
            if self._pool is not None:
                self._pool.shutdown(wait=False)
            self._pool = ThreadPoolExecutor(max_workers=max(workers, 1))

        def upload(slot: int) -> None:
            conn = self._streams[slot]
            for f in files[slot::workers]:
                conn.request(_prepare_request(f, job))

        t0 = time.perf_counter()
        futures = [self._pool.submit(upload, slot) for slot in range(workers)]
        try:
            for fut in futures:
                fut.result()
        except Exception:
            self._best_effort_stop()
            raise
        return time.perf_counter() - t0

    def prepare(self, job: CompiledJob, mode: str) -> float:
        if mode == "sequential":
            return self.prepare_sequential(job)
        if mode == "parallel":
            return self.prepare_parallel(job)
        raise ValueError(f"unknown prepare mode {mode!r}")

    # -- full iteration -----------------------------------------------------

    def wait_done(self, schedule_nominal_s: float) -> float:
        """Poll status at 1 ms until the cluster reports done."""
        deadline = time.perf_counter() + self.wait_timeout_s + schedule_nominal_s
        t0 = time.perf_counter()
        while True:
            state = self.status()["state"]
            if state == "done":
                return time.perf_counter() - t0
            if state in ("idle", "armed"):
                raise ProtocolError("bad_state", f"cluster went {state} while waiting")
            if time.perf_counter() > deadline:
                raise TransportError("timed out waiting for schedule completion")
            time.sleep(POLL_INTERVAL_S)

    def retrieve_all(self, job: CompiledJob) -> AcquisitionData:
        bits: dict[int, tuple[int, ...]] = {}
        raw: dict[int, tuple[float, ...]] = {}
        replies = []
        shots = 0
        for module in job.readout_modules():
            reply = self.retrieve(module)
            replies.append(reply)
            shots = max(shots, int(reply.get("shots", 0)))
            for q_text, values in reply.get("bits", {}).items():
                bits[int(q_text)] = tuple(int(v) for v in values)
            for q_text, values in reply.get("raw", {}).items():
                raw[int(q_text)] = tuple(float(v) for v in values)
        return AcquisitionData(shots=shots, bits=bits, raw=raw, replies=tuple(replies))

    def run_iteration(self, job: CompiledJob, prepare_mode: str = "sequential"):
        """One full cycle. Returns (AcquisitionData, IterationTimings)."""
        t_iter = time.perf_counter()
        try:
            t0 = time.perf_counter()
            self.stop()
            stop_s = time.perf_counter() - t0

            prepare_s = self.prepare(job, prepare_mode)

            t0 = time.perf_counter()
            self.start()
            start_s = time.perf_counter() - t0

            wait_s = self.wait_done(job.schedule_seconds)

            t0 = time.perf_counter()
            acquisition = self.retrieve_all(job)
            retrieve_s = time.perf_counter() - t0

            t0 = time.perf_counter()
            self.stop()
            final_stop_s = time.perf_counter() - t0
        except (TransportError, ProtocolError):
            self._best_effort_stop()
            raise
        timings = IterationTimings(
            stop_s=stop_s,
            prepare_s=prepare_s,
            start_s=start_s,
            wait_done_wall_s=wait_s,
            retrieve_s=retrieve_s,
            final_stop_s=final_stop_s,
            wall_total_s=time.perf_counter() - t_iter,
            schedule_nominal_s=job.schedule_seconds,
            prepare_mode=prepare_mode,
            reset_mode=job.reset,
        )
        return acquisition, timings

    # -- lifecycle ----------------------------------------------------------

    def _best_effort_stop(self):
        try:
            self._main.request({"cmd": "stop"})
        except (TransportError, ProtocolError):
            pass

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=False)
            self._pool = None
        for conn in [self._main, *self._streams]:
            conn.close()
        self._streams = []

    def __enter__(self) -> "ClusterClient":
        return self

    def __exit__(self, *exc):
        self.close()
        return False
