/**
 * Keyboard-first navigation: a pure reducer over the session cursor so
 * annotators can step frames and objects without touching the mouse.
 *
 * Bindings: ArrowRight / ArrowLeft (or j / k) move between frames,
 * n / Tab selects the next object in the frame, p the previous one,
 * Home / End jump to the first / last frame.
 */

import { ReviewSession } from "./session.js";

export interface NavState {
  cursor: number;
  selected: number;
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}

export function navigate(session: ReviewSession, state: NavState, key: string): NavState {
  const frameCount = session.document.frames.length;
  if (frameCount === 0) return { cursor: 0, selected: 0 };
  const lastFrame = frameCount - 1;
  let { cursor, selected } = state;
  const recordCount = () => session.document.frames[cursor].records.length;

  switch (key) {
    case "ArrowRight":
    case "j":
      cursor = clamp(cursor + 1, 0, lastFrame);
      selected = 0;
      break;
    case "ArrowLeft":
    case "k":
      cursor = clamp(cursor - 1, 0, lastFrame);
      selected = 0;
      break;
    case "Home":
      cursor = 0;
      selected = 0;
      break;
    case "End":
      cursor = lastFrame;
      selected = 0;
      break;
    case "n":
    case "Tab":
      selected = recordCount() === 0 ? 0 : (selected + 1) % recordCount();
      break;
    case "p":
      selected = recordCount() === 0 ? 0 : (selected - 1 + recordCount()) % recordCount();
      break;
    default:
      break;
  }
  return { cursor, selected };
}
