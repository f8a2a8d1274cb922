"""HTTP collector: accepts profile batches and stores them by content digest.

POST /v1/batch takes a newline-delimited wire-format body; each line is
validated independently, so one malformed line never rejects the whole
batch. Accepted lines are written as one file named by their SHA-256 digest
(tmp file + atomic rename), which makes concurrent posts safe without locks
and makes duplicate posts naturally idempotent. GET /healthz answers "ok".
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .profile_model import BATCH_EXTENSION, MalformedRecord, parse_record


def store_batch(out_dir: Path, body: str) -> tuple[int, int, str | None]:
    """Validate lines, persist the accepted ones; returns (accepted, rejected, path).

    Path is None when nothing was accepted. A batch whose digest already
    exists is not rewritten, but counts as accepted.
    """
    accepted_lines = []
    rejected = 0
    for line in body.splitlines():
        if not line.strip():
            continue
        try:
            parse_record(line)
        except MalformedRecord:
            rejected += 1
            continue
        accepted_lines.append(line.strip())
    if not accepted_lines:
        return 0, rejected, None

    content = "\n".join(accepted_lines) + "\n"
    digest = hashlib.sha256(content.encode("utf-8")).hexdigest()
    final = out_dir / f"{digest}{BATCH_EXTENSION}"
    if not final.exists():
        tmp = out_dir / f".{digest}.{os.getpid()}.{threading.get_ident()}.tmp"
        tmp.write_text(content, encoding="utf-8")
        os.replace(tmp, final)
    return len(accepted_lines), rejected, str(final)


class CollectorHandler(BaseHTTPRequestHandler):
    out_dir: Path  # set by make_server

    def log_message(self, format, *args):  # quiet by default
        pass

    def _respond(self, status: int, payload: dict | str) -> None:
        body = (json.dumps(payload) if isinstance(payload, dict) else payload).encode()
        self.send_response(status)
        self.send_header("Content-Type",
                         "application/json" if isinstance(payload, dict) else "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path == "/healthz":
            self._respond(200, "ok")
        else:
            self._respond(404, {"error": "not found"})

    def do_POST(self) -> None:
        if self.path != "/v1/batch":
            self._respond(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            body = raw.decode("utf-8")
        except UnicodeDecodeError:
            self._respond(400, {"error": "body must be UTF-8 text"})
            return
        try:
            accepted, rejected, _ = store_batch(self.out_dir, body)
        except OSError as exc:
            self._respond(507, {"error": f"storage unavailable: {exc}"})
            return
        self._respond(202, {"accepted": accepted, "rejected": rejected})


def make_server(bind: str, port: int, out_dir) -> ThreadingHTTPServer:
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    class BoundHandler(CollectorHandler):
        pass

    BoundHandler.out_dir = out_path
    return ThreadingHTTPServer((bind, port), BoundHandler)


def serve(bind: str, port: int, out_dir) -> None:
    server = make_server(bind, port, out_dir)
    host, actual_port = server.server_address[:2]
    print(f"collector listening on http://{host}:{actual_port} -> {out_dir}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
