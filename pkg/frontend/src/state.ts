/** Pure view-state helpers. Everything here is a projection of service
 * responses; a hard refresh rebuilds identical views from GET endpoints. */

import type { IndicationView, SessionView, TagRef, TraceEventView } from "./api.js";

export interface HudViewState {
  phase: string;
  stepCursor: number;
  stepCount: number;
  substate: string;
  nextExpected: string;
  expectedTag: { kind: string; tagId: number } | null;
  defectCount: number;
  docs: { media: string; uri: string; title: string }[];
  stepLabel: string;
  finished: boolean;
}

export function hudView(session: SessionView): HudViewState {
  const step = session["current-step"];
  return {
    phase: session.phase,
    stepCursor: session["step-cursor"],
    stepCount: session["step-count"],
    substate: session["scan-substate"],
    nextExpected: session["next-expected"],
    expectedTag: session["expected-tag"]
      ? { kind: session["expected-tag"].kind, tagId: session["expected-tag"]["tag-id"] }
      : null,
    defectCount: session["defect-count"],
    docs: step ? step["doc-assets"] : [],
    stepLabel: step
      ? `step ${step.index + 1}/${session["step-count"]} (${step.phase})`
      : session.phase === "Completed"
        ? "all steps validated"
        : "no active step",
    finished: session.phase === "Completed" || session.phase === "Aborted",
  };
}

/** Merge an indication batch into the feed, keeping it seq-sorted and
 * deduplicated; the feed never reorders. */
export function mergeIndications(
  feed: IndicationView[],
  incoming: IndicationView[],
): IndicationView[] {
  const bySeq = new Map<number, IndicationView>();
  for (const item of feed) bySeq.set(item.seq, item);
  for (const item of incoming) {
    if (!bySeq.has(item.seq)) bySeq.set(item.seq, item);
  }
  return [...bySeq.values()].sort((a, b) => a.seq - b.seq);
}

export function lastSeq(feed: IndicationView[]): number {
  return feed.length ? feed[feed.length - 1].seq : 0;
}

/** Mirror of the service-side payload rules so the composer can refuse a
 * malformed indication before sending. Returns an error message or null. */
export function validateIndicationPayload(
  kind: string,
  payload: Record<string, unknown>,
): string | null {
  switch (kind) {
    case "Graphical": {
      const anchor = payload["anchor-tag-id"];
      if (typeof anchor !== "number" || !Number.isInteger(anchor) || anchor <= 0) {
        return "graphical indication needs a positive anchor-tag-id";
      }
      const shape = payload["shape"];
      if (shape !== "Arrow" && shape !== "Circle" && shape !== "Highlight") {
        return "shape must be Arrow, Circle or Highlight";
      }
      if (payload["label"] !== undefined && typeof payload["label"] !== "string") {
        return "label must be a string";
      }
      return null;
    }
    case "Oral": {
      const transcript = payload["transcript"];
      if (typeof transcript !== "string" || transcript.length === 0) {
        return "oral indication needs a transcript";
      }
      const audio = payload["audio-ref"];
      if (audio !== undefined && audio !== null && typeof audio !== "string") {
        return "audio-ref must be a string uri";
      }
      return null;
    }
    case "Textual": {
      const text = payload["text"];
      if (typeof text !== "string" || text.length === 0) {
        return "textual indication needs text";
      }
      return null;
    }
    default:
      return `unknown indication kind: ${kind}`;
  }
}

export function describeIndication(item: IndicationView): string {
  switch (item.kind) {
    case "Textual":
      return String(item.payload["text"] ?? "");
    case "Oral":
      return `(oral) ${String(item.payload["transcript"] ?? "")}`;
    case "Graphical": {
      const shape = String(item.payload["shape"] ?? "?");
      const anchor = String(item.payload["anchor-tag-id"] ?? "?");
      const label = item.payload["label"] ? ` "${String(item.payload["label"])}"` : "";
      return `${shape} on tag ${anchor}${label}`;
    }
    default:
      return item.kind;
  }
}

/** Scan buttons are generated from the world's tag set, machines excluded
 * (binding has its own control). Sorted by kind then id for stable layout. */
export function scanButtons(tags: TagRef[]): TagRef[] {
  const order: Record<string, number> = { Tool: 0, Part: 1, Badge: 2 };
  return tags
    .filter((t) => t.kind in order)
    .sort((a, b) => order[a.kind] - order[b.kind] || a["tag-id"] - b["tag-id"]);
}

export function describeEvent(event: TraceEventView): string {
  const subject =
    event["tool-id"] !== null
      ? ` tool ${event["tool-id"]}`
      : event["part-id"] !== null
        ? ` part ${event["part-id"]}`
        : "";
  const detail = event.detail ? ` [${event.detail}]` : "";
  return `#${event.seq} ${event["iso-time"]} ${event.kind}${subject}${detail}`;
}

export function outcomeToast(result: string, reason: string | null, nextExpected: string): {
  ok: boolean;
  text: string;
} {
  if (result === "Rejected") {
    return { ok: false, text: `${reason ?? "Rejected"} — expected ${nextExpected}` };
  }
  return { ok: true, text: `${result}; next: ${nextExpected}` };
}
