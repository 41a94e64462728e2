/** Technician HUD: session controls, simulated scan buttons, doc list,
 * indication overlay, assistance request, connectivity toggle. */

import { ApiError, createClient } from "./api.js";
import type { Client, IndicationView, SessionView, TagRef } from "./api.js";
import {
  describeIndication,
  hudView,
  lastSeq,
  mergeIndications,
  outcomeToast,
  scanButtons,
} from "./state.js";

const client: Client = createClient(window.location.origin);

let session: SessionView | null = null;
let collabId: number | null = null;
let feed: IndicationView[] = [];
let polling = false;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function toast(ok: boolean, text: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = text;
  box.className = ok ? "toast ok" : "toast bad";
}

function renderSession(): void {
  const panel = el<HTMLDivElement>("step-card");
  if (!session) {
    panel.innerHTML = "<p>No session. Authenticate to begin.</p>";
    return;
  }
  const view = hudView(session);
  const docs = view.docs
    .map((d) => `<li>[${d.media}] <a href="${d.uri}">${d.title}</a></li>`)
    .join("");
  panel.innerHTML = `
    <p><b>Session ${session["session-id"]}</b> — ${view.phase}</p>
    <p>${view.stepLabel}</p>
    <p class="substate">awaiting <b>${view.nextExpected}</b>
       <span class="badge">${view.substate}</span></p>
    <p>defects: ${view.defectCount}</p>
    <ul class="docs">${docs}</ul>`;
}

function renderFeed(): void {
  const list = el<HTMLUListElement>("indications");
  list.innerHTML = feed
    .map((i) => `<li class="ind ${i.kind.toLowerCase()}">#${i.seq} ${describeIndication(i)}</li>`)
    .join("");
}

async function refreshButtons(): Promise<void> {
  const tags: TagRef[] = await client.listTags();
  const box = el<HTMLDivElement>("scan-buttons");
  box.innerHTML = "";
  for (const tag of scanButtons(tags)) {
    const button = document.createElement("button");
    button.textContent = `${tag.kind} ${tag["tag-id"]}`;
    button.addEventListener("click", () => doScan(tag.kind, tag["tag-id"]));
    box.appendChild(button);
  }
}

async function doScan(kind: string, tagId: number): Promise<void> {
  if (!session) {
    toast(false, "no session");
    return;
  }
  try {
    const result = await client.scan(session["session-id"], kind, tagId);
    session = result.session;
    const note = outcomeToast(
      result.outcome.result,
      result.outcome.reason,
      result.outcome["next-expected"],
    );
    toast(note.ok, note.text);
    renderSession();
  } catch (err) {
    toast(false, err instanceof ApiError ? err.message : `network failure: ${err} — retry`);
  }
}

async function pollLoop(): Promise<void> {
  if (polling) return;
  polling = true;
  while (collabId !== null) {
    try {
      const batch = await client.pollIndications(collabId, lastSeq(feed), 20);
      feed = mergeIndications(feed, batch.indications);
      renderFeed();
      if (batch.state === "Closed") break;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 2000));
    }
  }
  polling = false;
}

async function main(): Promise<void> {
  await refreshButtons();

  el<HTMLButtonElement>("start").addEventListener("click", async () => {
    const badge = Number(el<HTMLInputElement>("badge").value);
    const workflow = Number(el<HTMLInputElement>("workflow").value);
    try {
      session = await client.createSession(badge, workflow);
      toast(true, `session ${session["session-id"]} opened`);
      renderSession();
    } catch (err) {
      toast(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>("bind").addEventListener("click", async () => {
    if (!session) return toast(false, "no session");
    try {
      const result = await client.bind(session["session-id"], session["machine-id"]);
      session = result.session;
      toast(true, `bound machine ${result.context.environment["machine-id"]} ` +
        `(context: ${result.context.provenance})`);
      renderSession();
    } catch (err) {
      toast(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>("assist").addEventListener("click", async () => {
    if (!session) return toast(false, "no session");
    const expertId = el<HTMLInputElement>("expert").value;
    try {
      const collab = await client.assist(session["session-id"], expertId);
      collabId = collab["collab-id"];
      toast(true, `assistance session ${collabId} opened with ${expertId}`);
      void pollLoop();
    } catch (err) {
      toast(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  el<HTMLButtonElement>("complete").addEventListener("click", async () => {
    if (!session) return toast(false, "no session");
    try {
      const result = await client.complete(session["session-id"]);
      session = result.session;
      toast(true, `completed: ${JSON.stringify(result.record["outcome"])}`);
      renderSession();
    } catch (err) {
      toast(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  const connectivity = el<HTMLInputElement>("connectivity");
  connectivity.checked = (await client.getConnectivity()).mode === "Online";
  connectivity.addEventListener("change", async () => {
    const mode = connectivity.checked ? "Online" : "Offline";
    await client.setConnectivity(mode);
    toast(true, `connectivity: ${mode}`);
  });

  el<HTMLButtonElement>("show-context").addEventListener("click", async () => {
    const machine = session ? session["machine-id"] : 42;
    try {
      const ctx = await client.getContext(machine);
      el<HTMLPreElement>("context").textContent =
        `provenance: ${ctx.provenance}\n` +
        `machine: ${ctx.environment["machine-id"]} ${ctx.environment.characteristics.name}\n` +
        `history entries: ${ctx.environment.history.length}\n` +
        `last operators: ${ctx.environment["last-operators"].join(", ")}`;
    } catch (err) {
      toast(false, err instanceof ApiError ? err.message : String(err));
    }
  });

  const experts = await client.listExperts();
  if (experts.length) {
    el<HTMLInputElement>("expert").value = experts[0]["expert-id"];
  }
  renderSession();
}

document.addEventListener("DOMContentLoaded", () => {
  void main();
});
