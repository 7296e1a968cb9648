import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError, LeafApi } from "../src/api.js";
import type { ChatResponse, DiagnoseResponse } from "../src/api.js";
import { App, MAX_UPLOAD_BYTES } from "../src/app.js";
import type { AppElements } from "../src/app.js";

const DIAGNOSE: DiagnoseResponse = {
  session_id: "sess-000001",
  detections: [{
    class_id: 3, class_name: "rust",
    x1: 160, y1: 120, x2: 480, y2: 360, confidence: 0.9,
  }],
  image_width: 640,
  image_height: 480,
  answer: "rust detected; prune and consider copper sprays",
  sources: [{ source_id: "rust.md", chunk_id: "rust.md#0" }],
};

const CHAT: ChatResponse = {
  session_id: "sess-000001",
  answer: "copper works preventively",
  sources: [{ source_id: "rust.md", chunk_id: "rust.md#1" }],
};

function buildDom(): AppElements {
  document.body.innerHTML = `
    <div id="banner" class="banner"></div>
    <div id="upload-zone"><input id="file-input" type="file"></div>
    <div id="preview-wrap"><img id="preview"><div id="overlay-layer"></div></div>
    <div id="detection-summary"></div>
    <div id="transcript"></div>
    <form id="chat-form">
      <input id="chat-input" type="text">
      <button id="send-btn" type="submit"></button>
    </form>`;
  const byId = <T extends HTMLElement>(id: string) =>
    document.getElementById(id) as T;
  return {
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
  };
}

function fakeApi(overrides: Partial<Record<"diagnose" | "chat", unknown>> = {}): LeafApi {
  return {
    diagnose: vi.fn(async () => DIAGNOSE),
    chat: vi.fn(async () => CHAT),
    health: vi.fn(),
    ...overrides,
  } as unknown as LeafApi;
}

function makeApp(api = fakeApi()) {
  const els = buildDom();
  // rendered at exactly half the natural size
  const app = new App(api, els, () => ({ width: 320, height: 240 }));
  app.bind();
  return { app, els, api };
}

function imageFile(bytes = 16): File {
  return new File([new Uint8Array(bytes)], "rusty.jpg", { type: "image/jpeg" });
}

beforeEach(() => {
  vi.restoreAllMocks();
  (globalThis.URL as unknown as { createObjectURL?: unknown }).createObjectURL =
    () => "blob:test";
});

describe("upload and diagnose", () => {
  it("draws the scaled overlay and renders the sourced answer", async () => {
    const { app, els } = makeApp();
    await app.uploadAndDiagnose(imageFile());

    const box = els.overlayLayer.querySelector(".overlay-box") as HTMLElement;
    expect(box).not.toBeNull();
    // server box (160,120)-(480,360) at scale 0.5
    expect(box.style.left).toBe("80px");
    expect(box.style.top).toBe("60px");
    expect(box.style.width).toBe("160px");
    expect(box.style.height).toBe("120px");

    expect(els.detectionSummary.textContent).toContain("rust");
    const chips = els.transcript.querySelectorAll(".source-chip");
    expect(chips.length).toBe(1);
    expect(app.sessionId).toBe("sess-000001");
    expect(els.sendButton.disabled).toBe(true); // input still empty
    els.chatInput.value = "ok";
    app.syncControls();
    expect(els.sendButton.disabled).toBe(false);
  });

  it("rejects oversized files client-side without calling the API", async () => {
    const api = fakeApi();
    const { app, els } = makeApp(api);
    await app.uploadAndDiagnose(imageFile(MAX_UPLOAD_BYTES + 1));
    expect((api.diagnose as ReturnType<typeof vi.fn>)).not.toHaveBeenCalled();
    expect(els.banner.className).toContain("visible");
  });

  it("shows a banner and keeps the transcript empty when the server fails", async () => {
    const api = fakeApi({
      diagnose: vi.fn(async () => {
        throw new ApiError(503, "store_empty", "ingest first");
      }),
    });
    const { app, els } = makeApp(api);
    await app.uploadAndDiagnose(imageFile());
    expect(els.banner.textContent).toContain("knowledge base");
    expect(els.transcript.children.length).toBe(0);
    expect(app.sessionId).toBeNull();
  });

  it("healthy result keeps chat enabled with a no-disease summary", async () => {
    const api = fakeApi({
      diagnose: vi.fn(async () => ({
        ...DIAGNOSE, detections: [], answer: "general care advice", sources: [],
      })),
    });
    const { app, els } = makeApp(api);
    await app.uploadAndDiagnose(imageFile());
    expect(els.detectionSummary.textContent).toContain("No disease detected");
    expect(app.sessionId).toBe("sess-000001");
  });
});

describe("follow-up chat", () => {
  async function diagnosed() {
    const ctx = makeApp();
    await ctx.app.uploadAndDiagnose(imageFile());
    return ctx;
  }

  it("appends the exchange and its source chips", async () => {
    const { app, els } = await diagnosed();
    els.chatInput.value = "does copper help?";
    await app.sendFollowup(els.chatInput.value);
    const bubbles = els.transcript.querySelectorAll(".bubble");
    expect(bubbles.length).toBe(3); // first answer + user + assistant
    expect(bubbles[1].className).toContain("bubble-user");
    expect(bubbles[2].querySelectorAll(".source-chip").length).toBe(1);
  });

  it("ignores empty input and disables send while empty", async () => {
    const { app, els, api } = await diagnosed();
    els.chatInput.value = "   ";
    app.syncControls();
    expect(els.sendButton.disabled).toBe(true);
    await app.sendFollowup("   ");
    expect((api.chat as ReturnType<typeof vi.fn>)).not.toHaveBeenCalled();
  });

  it("blocks a second in-flight request", async () => {
    let release: (value: ChatResponse) => void = () => {};
    const api = fakeApi({
      chat: vi.fn(() => new Promise<ChatResponse>((resolve) => {
        release = resolve;
      })),
    });
    const ctx = makeApp(api);
    await ctx.app.uploadAndDiagnose(imageFile());
    const first = ctx.app.sendFollowup("first");
    expect(ctx.app.pending).toBe(true);
    expect(ctx.els.sendButton.disabled).toBe(true);
    await ctx.app.sendFollowup("second");
    expect((api.chat as ReturnType<typeof vi.fn>)).toHaveBeenCalledTimes(1);
    release(CHAT);
    await first;
    expect(ctx.app.pending).toBe(false);
  });

  it("expired session rolls back the optimistic bubble and prompts re-upload", async () => {
    const api = fakeApi({
      chat: vi.fn(async () => {
        throw new ApiError(404, "unknown_session", "gone");
      }),
    });
    const ctx = makeApp(api);
    await ctx.app.uploadAndDiagnose(imageFile());
    ctx.els.chatInput.value = "still there?";
    await ctx.app.sendFollowup("still there?");
    expect(ctx.app.sessionId).toBeNull();
    const notice = ctx.els.transcript.querySelector(".bubble-notice");
    expect(notice?.textContent).toContain("Upload the image again");
    expect(ctx.els.transcript.querySelectorAll(".bubble-user").length).toBe(0);
    expect(ctx.els.chatInput.value).toBe("still there?"); // restored for retry
  });
});

describe("overlay refresh", () => {
  it("uses only pure scaling, never mutating server geometry", async () => {
    const { app, els } = makeApp();
    await app.uploadAndDiagnose(imageFile());
    const before = (els.overlayLayer.querySelector(".overlay-box") as HTMLElement)
      .style.left;
    app.refreshOverlays();
    const after = (els.overlayLayer.querySelector(".overlay-box") as HTMLElement)
      .style.left;
    expect(after).toBe(before);
  });
});
