from __future__ import annotations

from pathlib import Path
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from microlti.config import ServiceConfig
from microlti.fixtures import sample_content
from microlti.service import ToolProviderService, create_app
from microlti.simulator import ToolConsumerSimulator


EXTERNAL_BASE = "http://testserver"


@pytest.fixture
def stack(tmp_path: Path) -> SimpleNamespace:
    """A tool provider wired to an in-process consumer simulator.

    Outcome POSTs route straight into the simulator's handler, so the
    whole launch/submit/passback loop runs without sockets.
    """
    config = ServiceConfig(storage_path=tmp_path / "data", external_base_url=EXTERNAL_BASE)
    service = ToolProviderService(config)
    credential = service.registry.register("sim-lms", "s3cr3t-shared", "Simulated LMS")
    content = sample_content()
    service.store.create(content)

    sim = ToolConsumerSimulator(credential, outcome_service_url="http://tc.example/sim/outcomes")
    service.outcome_http_post = lambda url, headers, body: sim.handle_outcome_request(
        "POST", url, headers, body
    )
    client = TestClient(create_app(service), follow_redirects=False)
    return SimpleNamespace(
        config=config,
        service=service,
        credential=credential,
        sim=sim,
        client=client,
        content=content,
        launch_url=f"{EXTERNAL_BASE}/lti/launch/{content.id}",
    )
