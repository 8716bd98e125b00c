import json
import subprocess
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import gen_data  # noqa: E402


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A small synthetic projection dataset built through the primary CLI."""
    out = tmp_path_factory.mktemp("data_small")
    rc = gen_data.main(["--out", str(out), "--count", "12",
                        "--base-seed", "9000", "--spacing", "0.6"])
    assert rc == 0
    assert (out / "index.json").exists()
    return out


def run_archreg(args):
    proc = subprocess.run(["archreg"] + [str(a) for a in args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout
