"""Client for an external model server speaking the line-delimited JSON protocol.

One JSON object per line over the child's stdin/stdout. The client owns
the handshake, request ids, base64 tensor packing, timeouts, and
probability-row sanity checks; everything else behaves like any other
ClassifierHandle.
"""

from __future__ import annotations

import base64
import json
import queue
import subprocess
import threading

import numpy as np

from .classifier import DEFAULT_BATCH_CAP, ClassifierHandle

PROTOCOL_VERSION = 1
HANDSHAKE_TIMEOUT = 10.0
REQUEST_TIMEOUT = 60.0


class ServerError(RuntimeError):
    """Base class for wire-backend failures."""


class HandshakeError(ServerError):
    pass


class WireProtocolError(ServerError):
    pass


class ServerTimeout(ServerError):
    pass


def _pack(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _unpack(text: str, shape) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"))
    count = int(np.prod(shape))
    if len(raw) != 4 * count:
        raise WireProtocolError(
            f"payload carries {len(raw)} bytes, shape {list(shape)} needs {4 * count}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)


class SubprocessClassifier(ClassifierHandle):
    kind = "subprocess"

    def __init__(self, proc, hello, batch_cap=DEFAULT_BATCH_CAP,
                 request_timeout=REQUEST_TIMEOUT):
        super().__init__(
            class_count=hello["classes"],
            input_shape=hello["input_shape"],
            supports_gradient=bool(hello.get("gradient", False)),
            batch_cap=batch_cap,
        )
        self._proc = proc
        self._timeout = float(request_timeout)
        self._next_id = 0
        self._lock = threading.Lock()
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    # -- plumbing ---------------------------------------------------------

    def _read_loop(self) -> None:
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                self._replies.put(json.loads(line))
            except json.JSONDecodeError:
                self._replies.put({"error": f"unparseable reply: {line[:200]!r}"})
        self._replies.put(None)  # EOF marker

    def _transact(self, request: dict) -> dict:
        with self._lock:
            request["id"] = self._next_id
            self._next_id += 1
            try:
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError) as exc:
                raise ServerError(f"server pipe closed: {exc}") from exc
            try:
                reply = self._replies.get(timeout=self._timeout)
            except queue.Empty:
                raise ServerTimeout(
                    f"no reply to request {request['id']} within {self._timeout}s"
                ) from None
        if reply is None:
            raise ServerError("server closed its output stream")
        if "error" in reply:
            raise WireProtocolError(str(reply["error"]))
        if reply.get("id") != request["id"]:
            raise WireProtocolError(
                f"reply id {reply.get('id')} does not match request {request['id']}"
            )
        return reply

    # -- ClassifierHandle hooks -------------------------------------------

    def _predict(self, chunk: np.ndarray) -> np.ndarray:
        b = chunk.shape[0]
        reply = self._transact({
            "op": "predict",
            "shape": [b, *self.input_shape],
            "data_b64": _pack(chunk),
        })
        probs = reply.get("probs")
        if not isinstance(probs, list) or len(probs) != b:
            raise WireProtocolError(f"expected {b} probability rows")
        out = np.asarray(probs, dtype=np.float64)
        if out.ndim != 2 or out.shape[1] != self.class_count:
            raise WireProtocolError(
                f"probability rows must have {self.class_count} entries, got shape {out.shape}"
            )
        if not np.isfinite(out).all() or out.min() < -1e-9:
            raise WireProtocolError("negative or non-finite probabilities")
        sums = out.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-3:
            raise WireProtocolError(
                f"probability row sums drift beyond 1e-3 (worst {sums[np.abs(sums - 1.0).argmax()]:.6f})"
            )
        return np.clip(out, 0.0, None) / sums[:, None]

    def _gradient(self, x: np.ndarray, y: int) -> np.ndarray:
        shape = [1, *self.input_shape]
        reply = self._transact({
            "op": "gradient",
            "label": int(y),
            "shape": shape,
            "data_b64": _pack(x[None, ...]),
        })
        if reply.get("shape") != shape:
            raise WireProtocolError(
                f"gradient shape {reply.get('shape')} does not match request {shape}"
            )
        return _unpack(reply.get("data_b64", ""), shape)[0]

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()


def spawn_server(cmd, batch_cap=DEFAULT_BATCH_CAP,
                 handshake_timeout=HANDSHAKE_TIMEOUT,
                 request_timeout=REQUEST_TIMEOUT) -> SubprocessClassifier:
    """Start a model server and complete the version-1 handshake."""
    try:
        proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
    except OSError as exc:
        raise ServerError(f"could not spawn server: {exc}") from exc

    hello_reply: queue.Queue = queue.Queue()

    def await_hello():
        line = proc.stdout.readline()
        hello_reply.put(line)

    waiter = threading.Thread(target=await_hello, daemon=True)
    try:
        proc.stdin.write(json.dumps({"op": "hello", "version": PROTOCOL_VERSION}) + "\n")
        proc.stdin.flush()
    except (BrokenPipeError, ValueError) as exc:
        proc.kill()
        raise HandshakeError(f"server died before handshake: {exc}") from exc
    waiter.start()
    try:
        line = hello_reply.get(timeout=handshake_timeout)
    except queue.Empty:
        proc.kill()
        raise HandshakeError(f"no handshake reply within {handshake_timeout}s") from None
    if not line:
        proc.kill()
        raise HandshakeError("server closed its output before the handshake")
    try:
        hello = json.loads(line)
    except json.JSONDecodeError as exc:
        proc.kill()
        raise HandshakeError(f"unparseable handshake: {line[:200]!r}") from exc
    if hello.get("op") != "hello" or hello.get("version") != PROTOCOL_VERSION:
        proc.kill()
        raise HandshakeError(
            f"expected hello/version {PROTOCOL_VERSION}, got {hello!r}"
        )
    for key in ("classes", "input_shape"):
        if key not in hello:
            proc.kill()
            raise HandshakeError(f"handshake missing {key!r}")
    return SubprocessClassifier(proc, hello, batch_cap, request_timeout)
