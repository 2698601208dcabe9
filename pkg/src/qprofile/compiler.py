"""Compilation of circuits into per-sequencer assembly program files.

Each qubit gets one control program and, if measured, one readout program.
A program file is UTF-8 text with two sections:

    # waveforms
    {"h_i": [40 floats], "h_q": [...], ...}
    # schedule
    move R0,<shots>
    shot:
    wait <ns>
    ...
    loop shot,R0
    stop

Instruction set (one per line, every timed op advances the cursor):

    move R<k>,<imm>       load an immediate into a register
    <label>:              branch target
    wait <ns>             idle for <ns> nanoseconds
    play <wf_i>,<wf_q>,<ns>   drive a pulse from two named envelopes
    acquire <bin>,<ns>    integrate the readout signal into a bin
    set_phase <deg>       rotate the carrier frame (zero duration)
    loop <label>,R<k>     decrement register, branch back while nonzero
    stop                  halt the sequencer

Rotations are realized as a frame set followed by a fixed calibrated pulse
(RX) or by the frame set alone (RZ). Two-qubit gates are timed on both
participants but have no dedicated pulse program. Reset is a fixed wait at
the top of every shot. Identical inputs compile to byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .circuit import Circuit, schedule_moments
from .timing import TimingModel

ENVELOPE_SAMPLES = 40

_WAVEFORM_HEADER = "# waveforms"
_SCHEDULE_HEADER = "# schedule"


class CompileError(ValueError):
    """Raised for inputs the compiler cannot lower."""


def _gaussian(samples: int, amplitude: float) -> list[float]:
    sigma = samples / 6.0
    mid = (samples - 1) / 2.0
    return [
        round(amplitude * math.exp(-0.5 * ((i - mid) / sigma) ** 2), 6)
        for i in range(samples)
    ]


def _gaussian_derivative(samples: int, amplitude: float) -> list[float]:
    sigma = samples / 6.0
    mid = (samples - 1) / 2.0
    return [
        round(
            amplitude * (-(i - mid) / sigma) * math.exp(-0.5 * ((i - mid) / sigma) ** 2),
            6,
        )
        for i in range(samples)
    ]


# Calibrated envelope pairs per pulse kind.
_ENVELOPES: dict[str, list[float]] = {
    "h_i": _gaussian(ENVELOPE_SAMPLES, 0.5),
    "h_q": _gaussian_derivative(ENVELOPE_SAMPLES, 0.1),
    "rx_i": _gaussian(ENVELOPE_SAMPLES, 1.0),
    "rx_q": _gaussian_derivative(ENVELOPE_SAMPLES, 0.2),
    "ro_i": _gaussian(ENVELOPE_SAMPLES, 0.8),
    "ro_q": _gaussian(ENVELOPE_SAMPLES, 0.8),
}


@dataclass(frozen=True)
class ProgramFile:
    qubit: int
    role: str  # "control" or "readout"
    module: str
    sequencer: int
    text: str

    def size_bytes(self) -> int:
        return len(self.text.encode("utf-8"))


@dataclass(frozen=True)
class CompiledJob:
    n: int
    shots: int
    reset: str
    circuit_seconds: float
    schedule_seconds: float
    files: tuple[ProgramFile, ...]
    waveforms: dict[str, list[float]]
    assignment: dict[int, dict[str, tuple[str, int]]]

    @property
    def control_programs(self) -> dict[int, str]:
        return {f.qubit: f.text for f in self.files if f.role == "control"}

    @property
    def readout_programs(self) -> dict[int, str]:
        return {f.qubit: f.text for f in self.files if f.role == "readout"}

    def readout_modules(self) -> tuple[str, ...]:
        return tuple(sorted({f.module for f in self.files if f.role == "readout"}))


@dataclass(frozen=True)
class FileSize:
    qubit: int
    role: str
    module: str
    sequencer: int
    total_bytes: int
    waveform_bytes: int
    schedule_bytes: int


@dataclass(frozen=True)
class JobSizeReport:
    files: tuple[FileSize, ...]
    total_bytes: int
    waveform_bytes: int
    schedule_bytes: int
    bytes_per_qubit: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "total_bytes": self.total_bytes,
                "waveform_bytes": self.waveform_bytes,
                "schedule_bytes": self.schedule_bytes,
                "bytes_per_qubit": self.bytes_per_qubit,
                "files": [
                    {
                        "qubit": f.qubit,
                        "role": f.role,
                        "module": f.module,
                        "sequencer": f.sequencer,
                        "total_bytes": f.total_bytes,
                        "waveform_bytes": f.waveform_bytes,
                        "schedule_bytes": f.schedule_bytes,
                    }
                    for f in self.files
                ],
            },
            sort_keys=True,
        )


def default_device_map(n: int, sequencers_per_module: int = 6) -> dict:
    """Assign qubit q to control module cm{q//6} and readout module rm{q//6}."""
    out = {}
    for q in range(n):
        m, s = divmod(q, sequencers_per_module)
        out[q] = {"control": (f"cm{m}", s), "readout": (f"rm{m}", s)}
    return out


def schedule_duration(c: Circuit, shots: int, reset: str, t: TimingModel) -> float:
    """Nominal schedule wall time: shots x (reset + one circuit pass)."""
    if shots <= 0:
        raise CompileError(f"shots must be positive, got {shots}")
    from .circuit import circuit_duration

    return shots * (t.reset_duration(reset) + circuit_duration(c, t))


def _ns(seconds: float) -> int:
    return int(round(seconds * 1e9))


def _fmt_deg(theta: float) -> str:
    return f"{math.degrees(theta):.4f}"


class _OpWriter:
    """Accumulates schedule lines, merging consecutive waits."""

    def __init__(self):
        self.lines: list[str] = []
        self._pending_wait = 0

    def wait(self, ns: int):
        if ns > 0:
            self._pending_wait += ns

    def _flush(self):
        if self._pending_wait > 0:
            self.lines.append(f"wait {self._pending_wait}")
            self._pending_wait = 0

    def emit(self, line: str):
        self._flush()
        self.lines.append(line)

    def done(self) -> list[str]:
        self._flush()
        return self.lines


def _qubit_timeline(
    writer: _OpWriter,
    q: int,
    role: str,
    moments,
    t: TimingModel,
    used: set[str],
):
    for dur, gates in moments:
        dur_ns = _ns(dur)
        mine = next((g for g in gates if q in g.qubits), None)
        if mine is None or role == "control" and mine.kind == "MEASURE":
            writer.wait(dur_ns)
            continue
        if role == "readout":
            if mine.kind == "MEASURE":
                used.update(("ro_i", "ro_q"))
                writer.emit(f"acquire 0,{_ns(t.measurement)}")
                writer.wait(dur_ns - _ns(t.measurement))
            else:
                writer.wait(dur_ns)
            continue
        if mine.kind == "H":
            used.update(("h_i", "h_q"))
            writer.emit(f"play h_i,h_q,{_ns(t.gate_1q)}")
            writer.wait(dur_ns - _ns(t.gate_1q))
        elif mine.kind == "RX":
            used.update(("rx_i", "rx_q"))
            writer.emit(f"set_phase {_fmt_deg(mine.theta)}")
            writer.emit(f"play rx_i,rx_q,{_ns(t.gate_1q)}")
            writer.wait(dur_ns - _ns(t.gate_1q))
        elif mine.kind == "RZ":
            writer.emit(f"set_phase {_fmt_deg(mine.theta)}")
            writer.wait(dur_ns)
        else:  # CNOT participation: timed, no pulse on this sequencer
            writer.wait(dur_ns)


def _render_program(
    q: int, role: str, moments, shots: int, reset_ns: int, t: TimingModel
) -> str:
    used: set[str] = set()
    writer = _OpWriter()
    writer.wait(reset_ns)
    _qubit_timeline(writer, q, role, moments, t, used)
    body = writer.done()
    table = {name: _ENVELOPES[name] for name in sorted(used)}
    lines = [
        _WAVEFORM_HEADER,
        json.dumps(table, sort_keys=True, separators=(",", ":")),
        _SCHEDULE_HEADER,
        f"move R0,{shots}",
        "shot:",
        *body,
        "loop shot,R0",
        "stop",
    ]
    return "\n".join(lines) + "\n"


def compile(
    c: Circuit,
    shots: int,
    reset: str,
    t: TimingModel | None = None,
    device: dict | None = None,
) -> CompiledJob:
    """Lower a circuit to per-sequencer program files.

    device maps qubit -> {"control": (module, seq), "readout": (module, seq)};
    defaults to six sequencers per module. Raises CompileError on zero shots,
    unknown reset modes, or unmapped qubits.
    """
    t = t or TimingModel()
    if shots <= 0:
        raise CompileError(f"shots must be positive, got {shots}")
    reset_s = t.reset_duration(reset)  # raises on unknown mode
    device = device if device is not None else default_device_map(c.n)
    for q in range(c.n):
        if q not in device or "control" not in device[q] or "readout" not in device[q]:
            raise CompileError(f"qubit {q} has no sequencer assignment")

    moments = schedule_moments(c, t)
    circuit_s = sum(d for d, _ in moments)
    reset_ns = _ns(reset_s)
    measured = set(c.measured_qubits())

    files: list[ProgramFile] = []
    waveforms: dict[str, list[float]] = {}
    for q in range(c.n):
        roles = ["control"] + (["readout"] if q in measured else [])
        for role in roles:
            module, seq = device[q][role]
            text = _render_program(q, role, moments, shots, reset_ns, t)
            files.append(
                ProgramFile(qubit=q, role=role, module=module, sequencer=seq, text=text)
            )
            table = json.loads(text.split("\n", 2)[1])
            waveforms.update(table)

    return CompiledJob(
        n=c.n,
        shots=shots,
        reset=reset,
        circuit_seconds=circuit_s,
        schedule_seconds=shots * (reset_s + circuit_s),
        files=tuple(files),
        waveforms=waveforms,
        assignment={q: dict(device[q]) for q in range(c.n)},
    )


def measure_job_size(job: CompiledJob) -> JobSizeReport:
    """Split every program file into waveform bytes vs schedule bytes."""
    sizes: list[FileSize] = []
    for f in job.files:
        data = f.text.encode("utf-8")
        sched_at = f.text.index(_SCHEDULE_HEADER)
        wf_bytes = len(f.text[:sched_at].encode("utf-8"))
        sizes.append(
            FileSize(
                qubit=f.qubit,
                role=f.role,
                module=f.module,
                sequencer=f.sequencer,
                total_bytes=len(data),
                waveform_bytes=wf_bytes,
                schedule_bytes=len(data) - wf_bytes,
            )
        )
    total = sum(s.total_bytes for s in sizes)
    wf = sum(s.waveform_bytes for s in sizes)
    return JobSizeReport(
        files=tuple(sizes),
        total_bytes=total,
        waveform_bytes=wf,
        schedule_bytes=total - wf,
        bytes_per_qubit=total / job.n,
    )
