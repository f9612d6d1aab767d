from datetime import datetime

import pytest

from pedwatch.sim import default_geometry


@pytest.fixture
def geometry():
    return default_geometry(epoch=datetime(2024, 6, 2, 8, 0, 0))
