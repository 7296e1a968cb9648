"""Detector implementations behind one small interface.

Two detectors ship with the package: a remote client speaking the JSON wire
protocol below, and a fixture detector that replays per-image sidecar label
files so every end-to-end test runs deterministically without a trained model.

Remote wire protocol: POST the image as multipart form data to the configured
URL; the response is ``{"detections": [{"class_id", "class_name", "x1", "y1",
"x2", "y2", "confidence"}], "image_width", "image_height"}``.
"""

from __future__ import annotations

import io
from pathlib import Path

import httpx
from PIL import Image, UnidentifiedImageError

from .boxes import BBox, ClassList, Detection, filter_and_nms, parse_predictions
from .errors import LeafAssistError, ProtocolError, TransportError


class ImageDecodeError(LeafAssistError):
    """Uploaded payload is not a decodable JPEG/PNG image."""


class FixtureMissError(LeafAssistError):
    """The fixture detector has no sidecar label file for the image."""


def decode_image_size(image_bytes: bytes) -> tuple[int, int]:
    """Return ``(width, height)`` of a JPEG/PNG payload or raise :class:`ImageDecodeError`."""
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"payload is not a decodable image: {exc}") from exc


class FixtureDetector:
    """Replays detections from ``<labels_dir>/<image stem>.txt`` sidecar files.

    Sidecar lines use the prediction label format (``class xc yc w h conf``,
    normalized). An empty sidecar means "no disease detected"; a missing
    sidecar is a lookup error so silently-wrong fixtures cannot slip through.
    """

    mode = "fixture"

    def __init__(self, labels_dir, classes: ClassList,
                 conf_threshold: float = 0.25, iou_threshold: float = 0.45):
        self.labels_dir = Path(labels_dir)
        self.classes = classes
        self.conf_threshold = conf_threshold
        self.iou_threshold = iou_threshold

    def detect(self, image_bytes: bytes, image_name: str) -> list[Detection]:
        width, height = decode_image_size(image_bytes)
        sidecar = self.labels_dir / (Path(image_name).stem + ".txt")
        if not sidecar.is_file():
            raise FixtureMissError(f"no sidecar labels for {image_name!r} "
                                   f"(looked for {sidecar})")
        raw = parse_predictions(sidecar.read_text(encoding="utf-8"),
                                width, height, self.classes)
        return filter_and_nms(raw, self.conf_threshold, self.iou_threshold)


class RemoteDetector:
    """Client for a detector service speaking the multipart-in/JSON-out protocol."""

    mode = "remote"

    def __init__(self, url: str, classes: ClassList,
                 conf_threshold: float = 0.25, iou_threshold: float = 0.45,
                 timeout: float = 30.0):
        self.url = url
        self.classes = classes
        self.conf_threshold = conf_threshold
        self.iou_threshold = iou_threshold
        # One pooled client shared by concurrent request handlers; httpx
        # clients are safe for concurrent use.
        self._client = httpx.Client(timeout=timeout)

    def detect(self, image_bytes: bytes, image_name: str) -> list[Detection]:
        decode_image_size(image_bytes)  # reject non-images before any network call
        try:
            response = self._client.post(
                self.url,
                files={"image": (image_name, image_bytes, "application/octet-stream")},
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"detector at {self.url} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(
                f"detector at {self.url} answered HTTP {response.status_code}")
        try:
            body = response.json()
            raw = [
                Detection(
                    class_id=int(d["class_id"]),
                    class_name=str(d["class_name"]),
                    bbox=BBox(float(d["x1"]), float(d["y1"]),
                              float(d["x2"]), float(d["y2"])),
                    confidence=float(d["confidence"]),
                )
                for d in body["detections"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detector response: {exc}") from exc
        return filter_and_nms(raw, self.conf_threshold, self.iou_threshold)
