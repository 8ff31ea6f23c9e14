"""Request loop and CLI for serving a model over stdio.

One JSON object per line, replies in request order, runs until EOF.
Malformed input becomes an error reply; only a model that fails to load
aborts the process (nonzero exit, before any handshake output).
"""

from __future__ import annotations

import argparse
import base64
import json
import sys

import numpy as np

from .model import ModelLoadError, ServedModel, load_served_model

PROTOCOL_VERSION = 1


def _decode_tensor(req: dict, expected_shape) -> np.ndarray:
    shape = req.get("shape")
    if (
        not isinstance(shape, list)
        or len(shape) != 1 + len(expected_shape)
        or any(not isinstance(v, int) or v < 1 for v in shape)
    ):
        raise ValueError(f"shape must be [b, {', '.join(map(str, expected_shape))}]")
    if tuple(shape[1:]) != tuple(expected_shape):
        raise ValueError(
            f"input shape {shape[1:]} does not match served model {list(expected_shape)}"
        )
    payload = req.get("data_b64")
    if not isinstance(payload, str):
        raise ValueError("data_b64 missing")
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise ValueError(f"data_b64 is not valid base64: {exc}") from exc
    count = int(np.prod(shape))
    if len(raw) != 4 * count:
        raise ValueError(f"payload carries {len(raw)} bytes, shape needs {4 * count}")
    # frombuffer views are read-only; torch wants writable memory
    return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def run_loop(model: ServedModel, stdin=None, stdout=None) -> int:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout

    def send(payload: dict) -> None:
        stdout.write(json.dumps(payload) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            send({"id": None, "error": "unparseable request"})
            continue
        if not isinstance(req, dict):
            send({"id": None, "error": "request must be a JSON object"})
            continue

        op = req.get("op")
        if op == "hello":
            send(
                {
                    "op": "hello",
                    "version": PROTOCOL_VERSION,
                    "classes": model.class_count,
                    "input_shape": list(model.input_shape),
                    "gradient": True,
                }
            )
            continue

        rid = req.get("id")
        try:
            if op == "predict":
                batch = _decode_tensor(req, model.input_shape)
                send({"id": rid, "probs": model.predict_probs(batch).tolist()})
            elif op == "gradient":
                batch = _decode_tensor(req, model.input_shape)
                if batch.shape[0] != 1:
                    raise ValueError("gradient expects a single input, shape [1, c, h, w]")
                label = req.get("label")
                if not isinstance(label, int):
                    raise ValueError("gradient needs an integer label")
                grad = model.loss_gradient(batch[0], label)
                send(
                    {
                        "id": rid,
                        "shape": list(req["shape"]),
                        "data_b64": base64.b64encode(
                            grad[None, ...].astype("<f4").tobytes()
                        ).decode("ascii"),
                    }
                )
            else:
                send({"id": rid, "error": f"unknown op {op!r}"})
        except Exception as exc:
            send({"id": rid, "error": str(exc)})
    return 0


def _parse_shape(text: str):
    parts = [p for p in text.replace("x", ",").split(",") if p.strip()]
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape spec {text!r}, want c,h,w")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="modelserve")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("serve", help="answer protocol requests on stdio until EOF")
    sp.add_argument("--model", required=True, help="TorchScript file to serve")
    sp.add_argument(
        "--input-shape",
        type=_parse_shape,
        default=None,
        help="c,h,w override when the model file carries no metadata",
    )
    args = parser.parse_args(argv)

    try:
        model = load_served_model(args.model, args.input_shape)
    except ModelLoadError as exc:
        print(f"modelserve: {exc}", file=sys.stderr)
        return 1
    return run_loop(model)


if __name__ == "__main__":
    sys.exit(main())
