// Application wiring: upload -> diagnose -> overlays + first answer, then a
// chat loop against the same session. One request in flight at a time; every
// server detection is drawn exactly as sent, scaled to the rendered image.

import { ApiError, LeafApi } from "./api.js";
import type { DetectionBox } from "./api.js";
import { renderOverlays, renderScale } from "./overlay.js";
import { appendBubble, appendNotice } from "./transcript.js";

export const MAX_UPLOAD_BYTES = 10 * 1024 * 1024;

export interface AppElements {
  fileInput: HTMLInputElement;
  uploadZone: HTMLElement;
  preview: HTMLImageElement;
  previewWrap: HTMLElement;
  overlayLayer: HTMLElement;
  banner: HTMLElement;
  transcript: HTMLElement;
  chatForm: HTMLFormElement;
  chatInput: HTMLInputElement;
  sendButton: HTMLButtonElement;
  detectionSummary: HTMLElement;
}

/** Measures the rendered size of the preview element; injectable for tests. */
export type MeasureFn = (img: HTMLImageElement) => { width: number; height: number };

const defaultMeasure: MeasureFn = (img) => {
  const rect = img.getBoundingClientRect();
  return { width: rect.width, height: rect.height };
};

export class App {
  sessionId: string | null = null;
  pending = false;
  private detections: DetectionBox[] = [];
  private naturalSize = { width: 0, height: 0 };

  constructor(
    private readonly api: LeafApi,
    private readonly els: AppElements,
    private readonly measure: MeasureFn = defaultMeasure,
  ) {}

  bind(): void {
    this.els.fileInput.addEventListener("change", () => {
      const file = this.els.fileInput.files?.[0];
      if (file) void this.uploadAndDiagnose(file);
    });
    this.els.uploadZone.addEventListener("dragover", (event) => {
      event.preventDefault();
      this.els.uploadZone.classList.add("over");
    });
    this.els.uploadZone.addEventListener("dragleave", () => {
      this.els.uploadZone.classList.remove("over");
    });
    this.els.uploadZone.addEventListener("drop", (event) => {
      event.preventDefault();
      this.els.uploadZone.classList.remove("over");
      const file = (event as DragEvent).dataTransfer?.files?.[0];
      if (file) void this.uploadAndDiagnose(file);
    });
    this.els.chatForm.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.sendFollowup(this.els.chatInput.value);
    });
    this.els.chatInput.addEventListener("input", () => this.syncControls());
    (this.els.preview.ownerDocument.defaultView ?? window).addEventListener(
      "resize", () => this.refreshOverlays());
    this.syncControls();
  }

  syncControls(): void {
    const empty = this.els.chatInput.value.trim().length === 0;
    this.els.sendButton.disabled = this.pending || empty || this.sessionId === null;
    this.els.chatInput.disabled = this.sessionId === null && !this.pending;
  }

  showBanner(message: string, kind: "error" | "info" = "error"): void {
    this.els.banner.textContent = message;
    this.els.banner.className = `banner banner-${kind} visible`;
  }

  clearBanner(): void {
    this.els.banner.textContent = "";
    this.els.banner.className = "banner";
  }

  async uploadAndDiagnose(file: File): Promise<void> {
    if (this.pending) return;
    if (file.size > MAX_UPLOAD_BYTES) {
      this.showBanner(`Image is too large (over ${MAX_UPLOAD_BYTES / (1024 * 1024)} MB).`);
      return;
    }
    this.clearBanner();
    this.pending = true;
    this.syncControls();
    try {
      if (typeof URL !== "undefined" && URL.createObjectURL) {
        this.els.preview.src = URL.createObjectURL(file);
      }
      this.els.previewWrap.classList.add("has-image");
      const result = await this.api.diagnose(file);

      this.sessionId = result.session_id;
      this.detections = result.detections;
      this.naturalSize = { width: result.image_width, height: result.image_height };
      this.refreshOverlays();

      if (result.detections.length === 0) {
        this.els.detectionSummary.textContent =
          "No disease detected. Ask about general leaf care below.";
      } else {
        const names = result.detections.map(
          (d) => `${d.class_name} (${(d.confidence * 100).toFixed(0)}%)`);
        this.els.detectionSummary.textContent = `Detected: ${names.join(", ")}`;
      }
      this.els.transcript.textContent = "";
      appendBubble(this.els.transcript, {
        role: "assistant", text: result.answer, sources: result.sources,
      });
    } catch (error) {
      this.showBanner(this.describe(error));
    } finally {
      this.pending = false;
      this.syncControls();
    }
  }

  async sendFollowup(text: string): Promise<void> {
    const message = text.trim();
    if (this.pending || message.length === 0 || this.sessionId === null) return;
    this.clearBanner();
    this.pending = true;
    this.syncControls();
    const optimistic = appendBubble(this.els.transcript, { role: "user", text: message });
    this.els.chatInput.value = "";
    try {
      const result = await this.api.chat(this.sessionId, message);
      appendBubble(this.els.transcript, {
        role: "assistant", text: result.answer, sources: result.sources,
      });
    } catch (error) {
      optimistic.remove();
      this.els.chatInput.value = message;
      if (error instanceof ApiError && error.status === 404) {
        this.sessionId = null;
        appendNotice(this.els.transcript,
          "This session has expired. Upload the image again to continue.");
      } else {
        this.showBanner(this.describe(error));
      }
    } finally {
      this.pending = false;
      this.syncControls();
    }
  }

  refreshOverlays(): void {
    const rendered = this.measure(this.els.preview);
    const scale = renderScale(
      this.naturalSize.width, this.naturalSize.height,
      rendered.width, rendered.height);
    renderOverlays(this.els.overlayLayer, this.detections, scale);
  }

  private describe(error: unknown): string {
    if (error instanceof ApiError) {
      switch (error.code) {
        case "store_empty":
          return "The knowledge base is empty; the server needs an ingest first.";
        case "not_an_image":
          return "That file is not a readable JPEG/PNG image.";
        case "too_large":
          return "The server rejected the image as too large.";
        case "session_busy":
          return "Still working on the previous question; try again in a moment.";
        default:
          return `Request failed (${error.code}): ${error.message}`;
      }
    }
    return "Could not reach the server. Is it running?";
  }
}

export function mount(doc: Document, api: LeafApi): App {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  const app = new App(api, {
    fileInput: byId<HTMLInputElement>("file-input"),
    uploadZone: byId("upload-zone"),
    preview: byId<HTMLImageElement>("preview"),
    previewWrap: byId("preview-wrap"),
    overlayLayer: byId("overlay-layer"),
    banner: byId("banner"),
    transcript: byId("transcript"),
    chatForm: byId<HTMLFormElement>("chat-form"),
    chatInput: byId<HTMLInputElement>("chat-input"),
    sendButton: byId<HTMLButtonElement>("send-btn"),
    detectionSummary: byId("detection-summary"),
  });
  app.bind();
  return app;
}
