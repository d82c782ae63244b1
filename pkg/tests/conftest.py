import os
import socket

import pytest

from anscore import cli
from anscore.toydata import write_toy_workspace_inputs
from anscore.workspace import Workspace

EPOCH = "1700000000"  # pinned so stored timestamps are reproducible


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """The suite must run fully offline; any socket connect is a failure."""

    def guard(self, *args, **kwargs):
        raise AssertionError(f"network access attempted: {args}")

    monkeypatch.setattr(socket.socket, "connect", guard)


def run_cli(*argv: str) -> int:
    return cli.main(list(argv))


def build_toy_workspace(root, inputs_dir, seed: int = 7) -> Workspace:
    """Full offline pipeline: ingest, extract, featurize, train, evaluate."""
    tsv, items = write_toy_workspace_inputs(inputs_dir, seed=seed)
    ws = str(root)
    assert run_cli("ingest", "--workspace", ws, "--items", str(items), "--train-tsv", str(tsv)) == 0
    assert run_cli("extract", "--workspace", ws, "--item", "toy1", "--backend", "mock") == 0
    assert run_cli("featurize", "--workspace", ws, "--item", "toy1", "--backend", "mock") == 0
    assert run_cli("train", "--workspace", ws, "--item", "toy1") == 0
    assert run_cli("evaluate", "--workspace", ws, "--item", "toy1", "--split", "valid") == 0
    return Workspace(root)


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory):
    old = os.environ.get("SOURCE_DATE_EPOCH")
    os.environ["SOURCE_DATE_EPOCH"] = EPOCH
    try:
        root = tmp_path_factory.mktemp("toy_ws")
        inputs = tmp_path_factory.mktemp("toy_inputs")
        yield build_toy_workspace(root, inputs)
    finally:
        if old is None:
            os.environ.pop("SOURCE_DATE_EPOCH", None)
        else:
            os.environ["SOURCE_DATE_EPOCH"] = old
