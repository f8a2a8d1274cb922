"""In-process profiler for serverless Python handlers.

Three signals, one buffer, one background flusher:

* a wall-clock interval timer drives stack sampling; each tick captures the
  interrupted frame chain (root-first, trimmed to the wrapped handler) and
  appends one record — no I/O ever happens inside the tick;
* an import hook times every first-time module import, keeping a timing
  stack so a parent's self time excludes the children it triggers;
* wrapped handlers emit one invocation event per call with wall time and a
  cold flag (first call in the process lifetime).

Records accumulate in a bounded in-memory buffer (drop-oldest beyond 10k,
drops surfaced in the next batch's meta record) and are flushed
asynchronously to a directory or an HTTP collector in the toolkit's
newline-delimited wire format. The buffer is cleared only after a confirmed
write.

Requires a main-thread install on a platform with POSIX interval timers.
"""

from __future__ import annotations

import builtins
import functools
import hashlib
import json
import os
import signal
import sys
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass

AGENT_VERSION = "0.1.0"
BATCH_EXTENSION = ".pgoprof.jsonl"
BUFFER_LIMIT = 10_000

ENV_HZ = "PGO_HZ"
ENV_SINK = "PGO_SINK"
ENV_APP_ID = "PGO_APP_ID"


class DoubleInstall(RuntimeError):
    """install() was already called in this process."""


class UnsupportedRuntime(RuntimeError):
    """No interval-timer signal facility (or not on the main thread)."""


class SinkUnavailable(OSError):
    """The flush target rejected or never received the batch."""


@dataclass(frozen=True)
class AgentConfig:
    sampling_hz: float = 100.0
    flush_interval_ms: int = 1000
    sink: str = "pgo-agent-out"  # directory path or http(s) collector URL
    app_id: str = "app"

    def __post_init__(self) -> None:
        if not (1 <= self.sampling_hz <= 1000):
            raise ValueError(f"sampling_hz must be in [1, 1000], got {self.sampling_hz}")
        if self.flush_interval_ms < 100:
            raise ValueError(f"flush_interval_ms must be >= 100, got {self.flush_interval_ms}")

    @classmethod
    def from_env(cls, **overrides) -> "AgentConfig":
        values = {}
        if ENV_HZ in os.environ:
            values["sampling_hz"] = float(os.environ[ENV_HZ])
        if ENV_SINK in os.environ:
            values["sink"] = os.environ[ENV_SINK]
        if ENV_APP_ID in os.environ:
            values["app_id"] = os.environ[ENV_APP_ID]
        values.update(overrides)
        return cls(**values)


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


class AgentHandle:
    def __init__(self, config: AgentConfig):
        self.config = config
        self._buffer: deque = deque()
        self._drops = 0
        self._paused = False  # sampling pauses while a flush serializes
        self._seen_cold = False
        self._inv_counter = 0
        # Active invocation: (invocation_id, entry_point, handler code object).
        self._current: tuple[str, str, object] | None = None
        self._pending_boot_imports: list[tuple[str, int]] = []
        self._import_stack: list[list] = []  # [module, start_ns, child_ns]
        self._timed_modules: set[str] = set()
        self._original_import = None
        self._previous_signal = None
        self._flusher: threading.Thread | None = None
        self._stop_event = threading.Event()
        self.installed = False

    # -- record construction (wire format, one dict per record) --------------

    def _append(self, record: dict) -> None:
        if len(self._buffer) >= BUFFER_LIMIT:
            self._buffer.popleft()
            self._drops += 1
        self._buffer.append(record)

    def _tick(self, signum, frame) -> None:
        if self._paused or frame is None:
            return
        current = self._current
        if current is None:
            return  # between invocations; nothing to attribute the sample to
        inv_id, entry_point, handler_code = current
        frames = []
        cursor = frame
        while cursor is not None:
            frames.append(cursor)
            cursor = cursor.f_back
        frames.reverse()  # root-first
        start = next((i for i, f in enumerate(frames) if f.f_code is handler_code), None)
        if start is None:
            return  # tick landed outside the handler (wrapper bookkeeping)
        trimmed = frames[start:]
        wire_frames = [[entry_point, trimmed[0].f_code.co_filename, trimmed[0].f_lineno]]
        wire_frames += [
            [f.f_code.co_name, f.f_code.co_filename, f.f_lineno] for f in trimmed[1:]
        ]
        self._append({
            "k": "sample",
            "ts": _now_ms(),
            "inv": inv_id,
            "ep": entry_point,
            "fr": wire_frames,
        })

    # -- import timing --------------------------------------------------------

    def _timed_import(self, name, globals=None, locals=None, fromlist=(), level=0):
        first_load = name not in sys.modules
        if not first_load:
            return self._original_import(name, globals, locals, fromlist, level)
        entry = [name, time.perf_counter_ns(), 0]
        self._import_stack.append(entry)
        try:
            return self._original_import(name, globals, locals, fromlist, level)
        finally:
            elapsed = time.perf_counter_ns() - entry[1]
            self._import_stack.pop()
            if self._import_stack:
                self._import_stack[-1][2] += elapsed
            self._record_import(name, max(0, elapsed - entry[2]))

    def _record_import(self, module: str, self_ns: int) -> None:
        if module in self._timed_modules:
            return
        self._timed_modules.add(module)
        self_us = self_ns // 1000
        if self._current is not None:
            self._append({"k": "imp", "inv": self._current[0], "mod": module,
                          "self_us": self_us})
        else:
            self._pending_boot_imports.append((module, self_us))

    def boot_import_total_us(self) -> int:
        return sum(us for _, us in self._pending_boot_imports)

    # -- handler wrapping -----------------------------------------------------

    def wrap_handler(self, fn, entry_point: str | None = None):
        name = entry_point or fn.__name__

        @functools.wraps(fn)
        def wrapped(*args, **kwargs):
            self._inv_counter += 1
            inv_id = f"{os.getpid():x}-{self._inv_counter}"
            cold = not self._seen_cold
            self._seen_cold = True
            started_ns = time.perf_counter_ns()
            self._current = (inv_id, name, fn.__code__)
            try:
                return fn(*args, **kwargs)
            finally:
                self._current = None
                e2e_us = (time.perf_counter_ns() - started_ns) // 1000
                if cold and self._pending_boot_imports:
                    # Boot-phase imports belong to the cold invocation; its
                    # end-to-end time covers them by construction.
                    for module, self_us in self._pending_boot_imports:
                        self._append({"k": "imp", "inv": inv_id, "mod": module,
                                      "self_us": self_us})
                    e2e_us += self.boot_import_total_us()
                    self._pending_boot_imports.clear()
                self._append({
                    "k": "invk",
                    "ts": _now_ms(),
                    "inv": inv_id,
                    "ep": name,
                    "e2e_us": e2e_us,
                    "cold": cold,
                })

        return wrapped

    # -- flushing -------------------------------------------------------------

    def _serialize_batch(self, records: list[dict]) -> str:
        meta = {
            "k": "meta",
            "app": self.config.app_id,
            "agent_ver": AGENT_VERSION,
            "hz": self.config.sampling_hz,
        }
        if self._drops:
            meta["drops"] = self._drops
            self._drops = 0
        lines = [json.dumps(meta, separators=(",", ":"))]
        lines += [json.dumps(r, separators=(",", ":")) for r in records]
        return "\n".join(lines) + "\n"

    def flush(self) -> str | None:
        """Drain the buffer to the sink; returns the file path or URL used.

        Nothing is written for an empty buffer. On sink failure the records
        are re-queued (oldest first, still bounded) and SinkUnavailable is
        raised.
        """
        if not self._buffer:
            return None
        self._paused = True
        try:
            records = list(self._buffer)
            self._buffer.clear()
            body = self._serialize_batch(records)
        finally:
            self._paused = False
        try:
            return self._write(body)
        except SinkUnavailable:
            for record in reversed(records):
                self._buffer.appendleft(record)
            while len(self._buffer) > BUFFER_LIMIT:
                self._buffer.pop()
                self._drops += 1
            raise

    def _write(self, body: str) -> str:
        sink = self.config.sink
        if sink.startswith("http://") or sink.startswith("https://"):
            url = sink.rstrip("/") + "/v1/batch"
            last_error = None
            for _ in range(2):  # one retry
                try:
                    req = urllib.request.Request(url, data=body.encode("utf-8"),
                                                 method="POST")
                    with urllib.request.urlopen(req, timeout=10) as resp:
                        if resp.status in (200, 202):
                            return url
                        last_error = OSError(f"collector answered {resp.status}")
                except (urllib.error.URLError, OSError) as exc:
                    last_error = exc
            raise SinkUnavailable(str(last_error))
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        try:
            os.makedirs(sink, exist_ok=True)
            final = os.path.join(sink, f"{digest}{BATCH_EXTENSION}")
            tmp = os.path.join(sink, f".{digest}.{os.getpid()}.tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                fh.write(body)
            os.replace(tmp, final)
            return final
        except OSError as exc:
            raise SinkUnavailable(str(exc)) from None

    def _flush_loop(self) -> None:
        interval = self.config.flush_interval_ms / 1000.0
        while not self._stop_event.wait(interval):
            try:
                self.flush()
            except SinkUnavailable:
                pass  # retained records go out with the next interval

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        interval = 1.0 / self.config.sampling_hz
        self._previous_signal = signal.signal(signal.SIGALRM, self._tick)
        signal.setitimer(signal.ITIMER_REAL, interval, interval)
        self._original_import = builtins.__import__
        builtins.__import__ = self._timed_import
        self._timed_modules = set(sys.modules)
        self._flusher = threading.Thread(target=self._flush_loop,
                                         name="pgo-agent-flush", daemon=True)
        self._flusher.start()
        self.installed = True

    def stop(self) -> None:
        """Disarm the timer, restore hooks, stop the flusher. Buffer remains."""
        if not self.installed:
            return
        signal.setitimer(signal.ITIMER_REAL, 0.0, 0.0)
        if self._previous_signal is not None:
            signal.signal(signal.SIGALRM, self._previous_signal)
        if self._original_import is not None:
            builtins.__import__ = self._original_import
        self._stop_event.set()
        if self._flusher is not None:
            self._flusher.join(timeout=5)
        self.installed = False
        global _installed_handle
        _installed_handle = None

    def buffered_records(self) -> list[dict]:
        return list(self._buffer)


_installed_handle: AgentHandle | None = None


def install(config: AgentConfig | None = None) -> AgentHandle:
    """Arm the sampler, import hook, and flusher; once per process.

    Must run on the main thread of a runtime with POSIX interval timers.
    """
    global _installed_handle
    if _installed_handle is not None:
        raise DoubleInstall("profiling agent is already installed in this process")
    if not hasattr(signal, "setitimer") or not hasattr(signal, "SIGALRM"):
        raise UnsupportedRuntime("interval timer signals are not available")
    if threading.current_thread() is not threading.main_thread():
        raise UnsupportedRuntime("install() must run on the main thread")
    handle = AgentHandle(config or AgentConfig.from_env())
    handle.start()
    _installed_handle = handle
    return handle


def wrap_handler(fn, entry_point: str | None = None):
    """Instrument a handler via the installed agent (decorator-friendly)."""
    if _installed_handle is None:
        raise RuntimeError("install() the agent before wrapping handlers")
    return _installed_handle.wrap_handler(fn, entry_point)


def flush() -> str | None:
    if _installed_handle is None:
        raise RuntimeError("install() the agent before flushing")
    return _installed_handle.flush()
