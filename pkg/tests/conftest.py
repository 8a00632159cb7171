import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cfdrepair.datasets import demo_dataset, demo_rules, demo_truth
from cfdrepair.state import RepairState


@pytest.fixture
def demo():
    return demo_dataset()


@pytest.fixture
def rules(demo):
    return demo_rules()


@pytest.fixture
def truth():
    return demo_truth()


@pytest.fixture
def state(demo, rules):
    return RepairState.initialize(demo, rules)
