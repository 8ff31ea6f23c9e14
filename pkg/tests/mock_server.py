#!/usr/bin/env python3
"""Test double for the model-server wire protocol.

Speaks newline-delimited JSON on stdio, backed by a builtin manifest, so
client code can be exercised without the real adapter. Quirk flags break
the protocol in controlled ways for the failure-path tests.
"""

import argparse
import base64
import json
import sys

import numpy as np

from distprobe.classifier import load_builtin


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("manifest")
    ap.add_argument("--no-gradient", action="store_true", help="advertise gradient: false")
    ap.add_argument(
        "--grad-error", action="store_true",
        help="advertise gradient support but reply with an error to gradient ops",
    )
    ap.add_argument("--drift", type=float, default=0.0, help="scale probability rows by 1+drift")
    ap.add_argument("--mute", action="store_true", help="swallow every non-hello request")
    ap.add_argument("--skip-hello", action="store_true", help="never answer the handshake")
    ap.add_argument("--wrong-version", action="store_true")
    args = ap.parse_args()

    handle = load_builtin(args.manifest)

    def send(payload) -> None:
        sys.stdout.write(json.dumps(payload) + "\n")
        sys.stdout.flush()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            send({"id": None, "error": "unparseable request"})
            continue
        op = req.get("op")
        if op == "hello":
            if args.skip_hello:
                continue
            send(
                {
                    "op": "hello",
                    "version": 2 if args.wrong_version else 1,
                    "classes": handle.class_count,
                    "input_shape": list(handle.input_shape),
                    "gradient": not args.no_gradient,
                }
            )
            continue
        if args.mute:
            continue
        rid = req.get("id")
        try:
            if op == "predict":
                shape = req["shape"]
                data = np.frombuffer(
                    base64.b64decode(req["data_b64"]), dtype="<f4"
                ).reshape(shape).astype(np.float64)
                probs = handle.predict_probs(data)
                if args.drift:
                    probs = probs * (1.0 + args.drift)
                send({"id": rid, "probs": probs.tolist()})
            elif op == "gradient":
                if args.no_gradient or args.grad_error:
                    send({"id": rid, "error": "gradient not supported"})
                    continue
                shape = req["shape"]
                data = np.frombuffer(
                    base64.b64decode(req["data_b64"]), dtype="<f4"
                ).reshape(shape).astype(np.float64)
                grad = handle.loss_gradient(data[0], int(req["label"]))
                payload = base64.b64encode(
                    grad[None, ...].astype("<f4").tobytes()
                ).decode("ascii")
                send({"id": rid, "shape": shape, "data_b64": payload})
            else:
                send({"id": rid, "error": f"unknown op {op!r}"})
        except Exception as exc:  # deliberate: every failure becomes an error reply
            send({"id": rid, "error": str(exc)})
    return 0


if __name__ == "__main__":
    sys.exit(main())
