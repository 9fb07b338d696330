from __future__ import annotations

import socket
import threading
import time

import pytest

from remi.config import EngineConfig
from remi.runtime import Runtime


@pytest.fixture
def runtime(tmp_path) -> Runtime:
    rt = Runtime(tmp_path / "data", offline=True)
    rt.seed_demo()
    return rt


@pytest.fixture
def fresh_runtime_factory(tmp_path):
    """Independent seeded runtimes over separate data dirs."""
    counter = {"n": 0}

    def make(config: EngineConfig | None = None, seed: bool = True, name: str | None = None) -> Runtime:
        counter["n"] += 1
        rt = Runtime(tmp_path / (name or f"data-{counter['n']}"), config=config, offline=True)
        if seed:
            rt.seed_demo()
        return rt

    return make


@pytest.fixture
def live_server(runtime):
    """Real uvicorn server on an ephemeral port (needed for SSE streaming,
    which in-process test transports cannot exercise)."""
    import uvicorn

    from remi.service import create_app

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()

    config = uvicorn.Config(
        create_app(runtime), host="127.0.0.1", port=port, log_level="warning", lifespan="off"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("test server failed to start")
        time.sleep(0.01)
    yield f"http://127.0.0.1:{port}", runtime
    server.should_exit = True
    thread.join(timeout=5)
