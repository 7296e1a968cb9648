from __future__ import annotations

import io
import sys
from pathlib import Path

import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))  # oracle/stubs helpers

from leafassist.boxes import ClassList


@pytest.fixture
def classes():
    return ClassList()


def make_image_bytes(width: int, height: int, color=(40, 120, 40)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="JPEG")
    return buf.getvalue()


@pytest.fixture
def image_bytes():
    return make_image_bytes(640, 480)
