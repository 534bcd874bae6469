/**
 * Gesture-to-event serialization for POST /modify.
 *
 * Every gesture gets a fresh event id; a retry of the same gesture reuses
 * the id so the server can apply it at most once. No-op gestures (zero drag,
 * scale factor exactly 1) are suppressed before they reach the wire.
 */

import type { SelectionState, Transform } from "./selection.js";
import type { ModifyRequest } from "./types.js";

let counter = 0;

/** Unique per gesture; time plus a counter keeps ids unique within a session. */
export function newEventId(now: () => number = Date.now): string {
  counter += 1;
  return `g-${now().toString(36)}-${counter.toString(36)}`;
}

/**
 * Serialize a gesture against a selection, or return null for a no-op.
 * The wire format matches the service contract exactly: move events carry
 * `delta`, scale events carry `factor` and `center`.
 */
export function gestureToEvent(
  sel: SelectionState,
  gesture: Transform,
  eventId: string,
): ModifyRequest | null {
  if (sel.indices.length === 0) {
    throw new Error("gesture requires a non-empty selection");
  }
  if (gesture.kind === "drag") {
    const [dx, dy] = gesture.delta;
    if (dx === 0 && dy === 0) return null;
    return {
      event_id: eventId,
      side: sel.side,
      indices: [...sel.indices],
      kind: "move",
      delta: [dx, dy],
    };
  }
  if (gesture.factor === 1.0) return null;
  return {
    event_id: eventId,
    side: sel.side,
    indices: [...sel.indices],
    kind: "scale",
    factor: gesture.factor,
    center: "centroid",
  };
}

/** Expand and contract are scale gestures; factor > 1 grows the selection. */
export function expandGesture(factor: number): Transform {
  if (!(factor > 0)) throw new Error(`scale factor must be positive, got ${factor}`);
  return { kind: "scale", factor };
}

export function dragGesture(dx: number, dy: number): Transform {
  return { kind: "drag", delta: [dx, dy] };
}

export function serializeEvent(req: ModifyRequest): string {
  return JSON.stringify(req);
}
