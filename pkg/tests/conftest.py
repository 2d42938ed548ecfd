import csv
import random

import pytest


@pytest.fixture
def spend_csv(tmp_path):
    """A 100-row CSV with an 'id' and a 'spend' column in [0, 25)."""
    path = tmp_path / "spend.csv"
    rng = random.Random(7)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "spend"])
        for i in range(100):
            writer.writerow([i, round(rng.uniform(0.0, 25.0), 2)])
    return path


@pytest.fixture
def ledger_path(tmp_path):
    return tmp_path / "ledger.jsonl"
