// Detection overlay geometry and rendering. The server reports boxes in the
// original image's pixel space; the client's only transform is the pure scale
// from that space to the rendered element size.

import type { DetectionBox } from "./api.js";

export interface RenderScale {
  scaleX: number;
  scaleY: number;
}

export interface OverlayRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

// one stable color per class index, reused across uploads
export const CLASS_COLORS = [
  "#e6194b", "#3cb44b", "#ffb000", "#4363d8",
  "#f58231", "#42d4f4", "#f032e6", "#469990",
];

export function colorForClass(classId: number): string {
  const index = ((classId % CLASS_COLORS.length) + CLASS_COLORS.length) % CLASS_COLORS.length;
  return CLASS_COLORS[index];
}

export function renderScale(
  naturalWidth: number,
  naturalHeight: number,
  renderedWidth: number,
  renderedHeight: number,
): RenderScale {
  if (naturalWidth <= 0 || naturalHeight <= 0) {
    return { scaleX: 1, scaleY: 1 };
  }
  return {
    scaleX: renderedWidth / naturalWidth,
    scaleY: renderedHeight / naturalHeight,
  };
}

export function scaleBox(box: DetectionBox, scale: RenderScale): OverlayRect {
  return {
    left: box.x1 * scale.scaleX,
    top: box.y1 * scale.scaleY,
    width: (box.x2 - box.x1) * scale.scaleX,
    height: (box.y2 - box.y1) * scale.scaleY,
  };
}

/** Replace the overlay layer's children with one labeled rect per detection. */
export function renderOverlays(
  layer: HTMLElement,
  detections: DetectionBox[],
  scale: RenderScale,
): void {
  layer.textContent = "";
  const doc = layer.ownerDocument;
  for (const det of detections) {
    const rect = scaleBox(det, scale);
    const el = doc.createElement("div");
    el.className = "overlay-box";
    el.style.left = `${rect.left}px`;
    el.style.top = `${rect.top}px`;
    el.style.width = `${rect.width}px`;
    el.style.height = `${rect.height}px`;
    el.style.borderColor = colorForClass(det.class_id);

    const label = doc.createElement("span");
    label.className = "overlay-label";
    label.style.backgroundColor = colorForClass(det.class_id);
    label.textContent = `${det.class_name} ${(det.confidence * 100).toFixed(0)}%`;
    el.appendChild(label);
    layer.appendChild(el);
  }
}
