from __future__ import annotations

import http.server
import threading
import time
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


class RecordingServer:
    """Local HTTP server serving ``/<domain>/<file>`` from a route table.

    Route values:
      ("ok", body)            200 with body
      ("status", code)        bare status code
      ("redirect", hops)      chain of ``hops`` 302s ending in 200
      ("sleep", secs, body)   200 after a delay
    """

    def __init__(self):
        self.routes = {}
        self.requests = []
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()
        server = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                with server._lock:
                    server.requests.append(self.path)
                    server.in_flight += 1
                    server.max_in_flight = max(server.max_in_flight, server.in_flight)
                try:
                    server.dispatch(self)
                finally:
                    with server._lock:
                        server.in_flight -= 1

        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.httpd.daemon_threads = True
        self.port = self.httpd.server_port
        self.thread = threading.Thread(target=self.httpd.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        self.thread.start()

    @property
    def url_template(self) -> str:
        return f"{{scheme}}://127.0.0.1:{self.port}/{{domain}}{{path}}"

    def initial_paths(self):
        return [p for p in self.requests if "/hop" not in p]

    def dispatch(self, handler):
        parts = handler.path.lstrip("/").split("/")
        domain, rest = parts[0], "/" + "/".join(parts[1:])
        route = self.routes.get(domain)
        if route is None:
            return self._send(handler, 404, b"")
        kind = route[0]
        if kind == "ok":
            return self._send(handler, 200, route[1])
        if kind == "status":
            return self._send(handler, route[1], b"")
        if kind == "sleep":
            time.sleep(route[1])
            return self._send(handler, 200, route[2])
        if kind == "redirect":
            hops = route[1]
            current = int(rest.rsplit("/hop", 1)[1]) if "/hop" in rest else 0
            if current >= hops:
                return self._send(handler, 200, b"adnet.com, 1, DIRECT\n")
            handler.send_response(302)
            handler.send_header("Location", f"/{domain}/hop{current + 1}")
            handler.send_header("Content-Length", "0")
            handler.end_headers()
            return None
        raise AssertionError(kind)

    @staticmethod
    def _send(handler, code, body):
        try:
            handler.send_response(code)
            handler.send_header("Content-Type", "text/plain")
            handler.send_header("Content-Length", str(len(body)))
            handler.end_headers()
            handler.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def http_server():
    server = RecordingServer()
    yield server
    server.close()


# -- acceptance criteria reporting ------------------------------------------
# Tests marked ``criterion("name")`` get one PASS/FAIL line in the summary.

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria.append((marker.args[0], report.passed, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, duration in _criteria:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({duration:.2f}s)")
