"""The full pipeline, offline: ingest -> extract -> featurize -> train ->
evaluate -> explain, all through the CLI against the bundled toy corpus.

Everything runs with the mock backend: no network, no credentials, fully
deterministic. The same commands drive a real deployment after switching
the backend to 'http' in the workspace config.
"""

import sys
import tempfile
from pathlib import Path

from anscore.cli import main as anscore
from anscore.toydata import write_toy_workspace_inputs

root = Path(tempfile.mkdtemp(prefix="anscore_demo_"))
ws = str(root / "workspace")
tsv, items = write_toy_workspace_inputs(root / "inputs")
print(f"workspace: {ws}\n")


def run(*argv):
    print(f"$ anscore {' '.join(argv)}")
    rc = anscore(list(argv))
    if rc != 0:
        sys.exit(rc)
    print()


run("ingest", "--workspace", ws, "--items", str(items), "--train-tsv", str(tsv))
run("extract", "--workspace", ws, "--item", "toy1", "--backend", "mock")
run("featurize", "--workspace", ws, "--item", "toy1", "--backend", "mock")
run("train", "--workspace", ws, "--item", "toy1")
run("evaluate", "--workspace", ws, "--item", "toy1", "--split", "valid")

# pick a response and inspect its explanation
from anscore.workspace import Workspace

corpus = Workspace(ws).load_dataset("toy1")
rid = corpus.responses[3].id
print(f"--- explanation for response {rid} ---")
run("explain", "--workspace", ws, "--response", rid)

print(f"--- what if C1 were a direct paraphrase? ---")
run("explain", "--workspace", ws, "--response", rid, "--override", "C1=2")

print("rerunning featurize against the warm cache (zero backend calls):")
run("featurize", "--workspace", ws, "--item", "toy1", "--backend", "mock")
