/** Expert console: session picker, context + history panel, indication
 * composer with payload validation, sent-indication timeline. */

import { ApiError, createClient } from "./api.js";
import type { Client, CollabView } from "./api.js";
import { describeEvent, describeIndication, validateIndicationPayload } from "./state.js";

const client: Client = createClient(window.location.origin);

let selected: number | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function note(ok: boolean, text: string): void {
  const box = el<HTMLDivElement>("note");
  box.textContent = text;
  box.className = ok ? "toast ok" : "toast bad";
}

async function refreshSessions(): Promise<void> {
  const collabs = await client.listCollabs();
  const picker = el<HTMLSelectElement>("picker");
  const current = picker.value;
  picker.innerHTML = collabs
    .map(
      (c) =>
        `<option value="${c["collab-id"]}">#${c["collab-id"]} intervention ` +
        `${c["session-id"]} (${c.state})</option>`,
    )
    .join("");
  if (current && collabs.some((c) => String(c["collab-id"]) === current)) {
    picker.value = current;
  }
  if (picker.value) {
    const cid = Number(picker.value);
    if (cid !== selected) {
      selected = cid;
      await renderSelected();
    }
  }
}

async function renderSelected(): Promise<void> {
  if (selected === null) return;
  const collab: CollabView = await client.getCollab(selected);
  const snapshot = collab.snapshot;
  if (snapshot) {
    const ctx = snapshot.context;
    el<HTMLPreElement>("context").textContent =
      `expert: ${collab["expert-id"]}   state: ${collab.state}\n` +
      `step cursor at open: ${snapshot["step-cursor"]}\n` +
      `context provenance: ${ctx.provenance}\n` +
      `machine ${ctx.environment["machine-id"]} ${ctx.environment.characteristics.name} ` +
      `${ctx.environment.characteristics.model}\n` +
      `location: ${ctx.environment.characteristics.location}\n` +
      `history entries: ${ctx.environment.history.length}\n` +
      `last operators: ${ctx.environment["last-operators"].join(", ")}\n` +
      `operator preferences: ${ctx.preferences["preferred-media"].join(", ") || "(none)"}`;
    el<HTMLUListElement>("history").innerHTML = snapshot["recent-events"]
      .map((e) => `<li>${describeEvent(e)}</li>`)
      .join("");
  }
  const live = await client.traceSession(collab["session-id"]);
  el<HTMLUListElement>("trace-tail").innerHTML = live
    .slice(-10)
    .map((e) => `<li>${describeEvent(e)}</li>`)
    .join("");
  const sent = await client.pollIndications(selected, 0, 0);
  el<HTMLUListElement>("timeline").innerHTML = sent.indications
    .map((i) => `<li>#${i.seq} [${i.kind}] ${describeIndication(i)}</li>`)
    .join("");
  el<HTMLButtonElement>("send").disabled = collab.state !== "Open";
}

function composerPayload(kind: string): Record<string, unknown> {
  if (kind === "Textual") {
    return { text: el<HTMLInputElement>("text").value };
  }
  if (kind === "Oral") {
    return { transcript: el<HTMLInputElement>("text").value };
  }
  return {
    "anchor-tag-id": Number(el<HTMLInputElement>("anchor").value),
    shape: el<HTMLSelectElement>("shape").value,
    label: el<HTMLInputElement>("text").value,
  };
}

async function main(): Promise<void> {
  el<HTMLSelectElement>("picker").addEventListener("change", async (event) => {
    selected = Number((event.target as HTMLSelectElement).value);
    await renderSelected();
  });

  el<HTMLSelectElement>("kind").addEventListener("change", () => {
    const graphical = el<HTMLSelectElement>("kind").value === "Graphical";
    el<HTMLSpanElement>("graphical-fields").style.display = graphical ? "" : "none";
  });

  el<HTMLButtonElement>("send").addEventListener("click", async () => {
    if (selected === null) return note(false, "pick a session first");
    const kind = el<HTMLSelectElement>("kind").value;
    const payload = composerPayload(kind);
    const problem = validateIndicationPayload(kind, payload);
    if (problem) return note(false, problem);
    try {
      const result = await client.sendIndication(selected, kind, payload);
      note(true, `sent #${result.seq}`);
      await renderSelected();
    } catch (err) {
      note(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>("close").addEventListener("click", async () => {
    if (selected === null) return;
    try {
      await client.closeCollab(selected);
      note(true, "assistance session closed");
      await renderSelected();
    } catch (err) {
      note(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  await refreshSessions();
  setInterval(() => void refreshSessions(), 2000);
}

document.addEventListener("DOMContentLoaded", () => {
  void main();
});
