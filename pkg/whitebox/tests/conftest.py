"""Shared fixtures: a tiny PNG dataset and a live TCP scorer service."""

from __future__ import annotations

import json
import queue
import threading

import numpy as np
import pytest
from PIL import Image

from whitebox.server import ScorerService, serve_tcp


def build_dataset(root, n=2, size=32):
    data = root / "data"
    data.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(7)
    entries = []
    for i in range(n):
        arr = (rng.random((size, size, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(data / f"img{i:02d}.png")
        entries.append({"image_id": f"img{i:02d}", "path": f"data/img{i:02d}.png", "label": i % 5})
    path = root / "manifest.json"
    path.write_text(json.dumps({"root": ".", "entries": entries}))
    return path


@pytest.fixture(scope="session")
def toy_scorer_endpoint():
    service = ScorerService("toy", deterministic=True)
    stop = threading.Event()
    ports: queue.Queue = queue.Queue()
    thread = threading.Thread(
        target=serve_tcp,
        args=(service, "127.0.0.1", 0),
        kwargs={"on_ready": ports.put, "stop_event": stop},
        daemon=True,
    )
    thread.start()
    port = ports.get(timeout=10)
    yield f"tcp:127.0.0.1:{port}"
    stop.set()
    thread.join(timeout=3)
