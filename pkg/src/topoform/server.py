"""HTTP service for real-time surrogate prediction.

JSON over two endpoints:

    GET  /meta     parameter names and bounds, grid dims, loadable fields
    POST /predict  {"family", "params", "fields", "mirror"?} -> per-field
                   dims + flat values + latency_ms, plus the model version

Models are loaded once and never mutated, so concurrent requests are safe
and identical requests produce identical responses.
"""

from __future__ import annotations

import json
import logging
import os
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .problems import mirror_depth
from .surrogate import combined_prediction

log = logging.getLogger(__name__)

PORT_ENV = "TOPOFORM_PORT"
MAX_BODY = 1 << 20
# derived kinds and the plain fields they multiply
COMBINED_FIELDS = {"combined_vm": ("density", "vm"), "combined_tc": ("density", "tc")}


class RequestError(Exception):
    """Client error carrying an HTTP status and the offending field name."""

    def __init__(self, status, field, message):
        super().__init__(message)
        self.status = status
        self.field = field


def available_fields(surrogates):
    """Plain loaded fields plus the derived products they enable."""
    plain = surrogates.fields()
    out = list(plain)
    for name, parts in COMBINED_FIELDS.items():
        if all(p in plain for p in parts):
            out.append(name)
    return out


def meta_payload(surrogates):
    return {
        "family": surrogates.family,
        "params": [
            {"name": s.name, "low": float(s.low), "high": float(s.high)}
            for s in surrogates.param_specs()
        ],
        "dims": list(surrogates.dims),
        "element_size": float(surrogates.element_size),
        "fields": available_fields(surrogates),
        "version": surrogates.version,
    }


def parse_predict_request(raw, surrogates):
    """Validate a /predict body; returns (params, fields, mirror)."""
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise RequestError(400, "body", f"body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise RequestError(400, "body", "body must be a JSON object")

    family = body.get("family")
    if family != surrogates.family:
        raise RequestError(
            400, "family",
            f"service holds {surrogates.family!r} models, got {family!r}",
        )

    raw_params = body.get("params")
    if not isinstance(raw_params, (list, tuple)):
        raise RequestError(400, "params", "params must be a list of numbers")
    try:
        params = np.asarray(raw_params, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise RequestError(400, "params", f"params not numeric: {exc}") from exc
    if params.ndim != 1 or not np.all(np.isfinite(params)):
        raise RequestError(400, "params", "params must be finite scalars")
    try:
        surrogates.problem.validate_params(params)
    except ValueError as exc:
        raise RequestError(422, "params", str(exc)) from exc

    fields = body.get("fields")
    if not isinstance(fields, list) or not fields:
        raise RequestError(400, "fields", "request at least one field")
    known = available_fields(surrogates)
    for f in fields:
        if f not in known:
            raise RequestError(
                400, "fields", f"unknown field kind {f!r}; available: {known}"
            )

    mirror = body.get("mirror", False)
    if not isinstance(mirror, bool):
        raise RequestError(400, "mirror", "mirror must be a boolean")
    if mirror and len(surrogates.dims) != 3:
        raise RequestError(
            400, "mirror", f"mirroring needs a 3D family, not {surrogates.family!r}"
        )
    return params.astype(np.float32), list(fields), mirror


def compute_fields(surrogates, params, fields, mirror=False):
    """Per-field flat values + dims + seconds; params assumed validated."""
    out = {}
    for name in fields:
        t0 = time.perf_counter()
        if name in COMBINED_FIELDS:
            xf, sf = COMBINED_FIELDS[name]
            preds = surrogates.predict(params, fields=[xf, sf])
            values = combined_prediction(preds[xf].values, preds[sf].values)
        else:
            values = surrogates.predict(params, fields=[name])[name].values
        dims = surrogates.dims
        if mirror:
            values = mirror_depth(values, surrogates.problem.mesh)
            dims = dims[:2] + (2 * dims[2],)
        out[name] = {
            "dims": list(dims),
            "values": np.asarray(values, dtype=np.float64),
            "seconds": time.perf_counter() - t0,
        }
    return out


def predict_payload(surrogates, params, fields, mirror):
    computed = compute_fields(surrogates, params, fields, mirror)
    return {
        "family": surrogates.family,
        "version": surrogates.version,
        "fields": {
            name: {
                "dims": entry["dims"],
                "values": [float(v) for v in entry["values"]],
                "latency_ms": round(entry["seconds"] * 1e3, 3),
            }
            for name, entry in computed.items()
        },
    }


def _make_handler(surrogates):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s %s", self.address_string(), fmt % args)

        def _send_json(self, status, payload):
            blob = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(blob)

        def _send_error(self, status, field, message):
            self._send_json(status, {"error": {"field": field, "message": message}})

        def do_GET(self):
            if self.path.split("?")[0] == "/meta":
                self._send_json(200, meta_payload(surrogates))
            else:
                self._send_error(404, "path", f"no such endpoint {self.path!r}")

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_POST(self):
            if self.path.split("?")[0] != "/predict":
                self._send_error(404, "path", f"no such endpoint {self.path!r}")
                return
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0:
                self._send_error(400, "body", "empty request body")
                return
            if length > MAX_BODY:
                self._send_error(400, "body", f"body larger than {MAX_BODY} bytes")
                return
            raw = self.rfile.read(length)
            try:
                params, fields, mirror = parse_predict_request(raw, surrogates)
            except RequestError as exc:
                self._send_error(exc.status, exc.field, str(exc))
                return
            self._send_json(200, predict_payload(surrogates, params, fields, mirror))

    return Handler


def resolve_port(port):
    """Environment override beats the configured port."""
    env = os.environ.get(PORT_ENV)
    if env is None:
        return int(port)
    try:
        return int(env)
    except ValueError as exc:
        raise ValueError(f"{PORT_ENV}={env!r} is not a port number") from exc


def make_server(surrogates, port=8080):
    server = ThreadingHTTPServer(("", resolve_port(port)), _make_handler(surrogates))
    server.daemon_threads = True
    return server


def run_server(surrogates, port=8080):
    server = make_server(surrogates, port)
    actual = server.server_address[1]
    log.info("serving %s surrogates on port %d", surrogates.family, actual)
    print(f"listening on port {actual} "
          f"(fields: {', '.join(available_fields(surrogates))})")
    try:
        server.serve_forever()
    finally:
        server.server_close()
