/**
 * Browser entry point: wires file loading, the canvas overlay, keyboard
 * navigation, the property editor panel, and export downloads.
 */

import { navigate } from "./keyboard.js";
import { drawOverlay, recordLabel } from "./render.js";
import { category, fieldVocabulary } from "./schema.js";
import {
  EditError,
  ReviewSession,
  applyEdit,
  exportSession,
  loadSession,
} from "./session.js";

interface AppState {
  session: ReviewSession | null;
  cursor: number;
  selected: number;
}

const state: AppState = { session: null, cursor: 0, selected: 0 };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function banner(message: string, isError: boolean): void {
  const bar = el<HTMLDivElement>("banner");
  bar.textContent = message;
  bar.className = isError ? "banner error" : "banner";
}

function currentFrame(session: ReviewSession) {
  return session.document.frames[state.cursor];
}

function redraw(): void {
  const canvas = el<HTMLCanvasElement>("viewport");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const session = state.session;
  if (!session || session.document.frames.length === 0) {
    ctx.fillStyle = "#888";
    ctx.fillText("no frames loaded", 20, 30);
    renderSidebar();
    return;
  }
  const frame = currentFrame(session);
  const image = session.frameImages[state.cursor];
  if (image) {
    const img = new Image();
    img.onload = () => {
      ctx.drawImage(img, 0, 0);
      drawOverlay(ctx, frame, state.selected);
    };
    img.src = image;
  } else {
    drawOverlay(ctx, frame, state.selected);
  }
  el<HTMLSpanElement>("frame-label").textContent =
    `frame ${frame.index} (${state.cursor + 1}/${session.document.frames.length})`;
  renderSidebar();
}

function renderSidebar(): void {
  const panel = el<HTMLDivElement>("properties");
  panel.textContent = "";
  const session = state.session;
  if (!session || session.document.frames.length === 0) return;
  const frame = currentFrame(session);
  const rec = frame.records[state.selected];
  if (!rec) return;

  const title = document.createElement("h3");
  title.textContent = recordLabel(rec);
  panel.appendChild(title);
  if (rec.props === null) return;

  const cat = category(rec.object_type);
  for (const [field, value] of Object.entries(rec.props as unknown as Record<string, unknown>)) {
    if (field === "size") continue;
    const vocab = fieldVocabulary(cat, field);
    const row = document.createElement("label");
    row.textContent = `${field}: `;
    const select = document.createElement("select");
    const options: unknown[] = vocab === "boolean" ? [false, true] : [...(vocab ?? [])];
    for (const option of options) {
      const node = document.createElement("option");
      node.value = JSON.stringify(option);
      node.textContent = String(option);
      node.selected = option === value;
      select.appendChild(node);
    }
    select.addEventListener("change", () => {
      try {
        state.session = applyEdit(
          state.session!,
          frame.index,
          rec.track_id,
          field,
          JSON.parse(select.value),
        );
        banner(`edited ${field} (log: ${state.session.editLog.length})`, false);
      } catch (exc) {
        banner(exc instanceof EditError ? exc.message : String(exc), true);
      }
      redraw();
    });
    row.appendChild(select);
    panel.appendChild(row);
  }
}

function download(name: string, text: string): void {
  const link = document.createElement("a");
  link.href = URL.createObjectURL(new Blob([text], { type: "application/json" }));
  link.download = name;
  link.click();
  URL.revokeObjectURL(link.href);
}

export function start(): void {
  el<HTMLInputElement>("load-input").addEventListener("change", async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    try {
      state.session = loadSession(await file.text());
      state.cursor = 0;
      state.selected = 0;
      banner(`loaded ${state.session.document.frames.length} frames`, false);
    } catch (exc) {
      state.session = null;
      banner(String((exc as Error).message), true);
    }
    redraw();
  });

  el<HTMLButtonElement>("export-button").addEventListener("click", () => {
    if (!state.session) return;
    const result = exportSession(state.session);
    download("annotations.corrected.json", result.json);
    download("annotations.diff.json", result.diff);
    banner(`exported with ${state.session.editLog.length} edits`, false);
  });

  window.addEventListener("keydown", (event) => {
    if (!state.session) return;
    if (event.target instanceof HTMLSelectElement) return;
    const next = navigate(state.session, state, event.key);
    if (next.cursor !== state.cursor || next.selected !== state.selected) {
      event.preventDefault();
      state.cursor = next.cursor;
      state.selected = next.selected;
      redraw();
    }
  });

  redraw();
}

if (typeof document !== "undefined" && document.getElementById("viewport")) {
  start();
}
