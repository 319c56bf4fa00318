import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # reference_eval importable

from mono3d.synthetic import default_calibration


@pytest.fixture
def calib():
    return default_calibration()
