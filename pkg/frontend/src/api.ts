/** Typed client for the hmtd service endpoints. */

export interface ErrorBody {
  code: string;
  message: string;
  detail?: string;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ErrorBody) {
    super(`${body.code}: ${body.message}`);
  }
}

export interface DocAsset {
  media: string;
  uri: string;
  title: string;
}

export interface StepView {
  index: number;
  phase: string;
  "required-tool-id": number;
  "required-part-id": number;
  "declared-part-id": number;
  "doc-assets": DocAsset[];
}

export interface SessionView {
  "session-id": number;
  phase: string;
  "step-cursor": number;
  "step-count": number;
  "scan-substate": string;
  "next-expected": string;
  "expected-tag": { kind: string; "tag-id": number } | null;
  "defect-count": number;
  "replaced-parts": Record<string, number>;
  "workflow-id": number;
  "machine-id": number;
  operator: { "badge-id": number; name: string };
  "start-time": number | null;
  "end-time": number | null;
  "current-step": StepView | null;
}

export interface ScanOutcomeView {
  result: string;
  reason: string | null;
  "next-expected": string;
}

export interface IndicationView {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TraceEventView {
  seq: number;
  time: number;
  "iso-time": string;
  "session-id": number;
  kind: string;
  "operator-badge-id": number;
  "machine-id": number;
  "tool-id": number | null;
  "part-id": number | null;
  detail: string;
}

export interface ContextView {
  environment: {
    "machine-id": number;
    characteristics: { name: string; model: string; location: string };
    history: Record<string, unknown>[];
    "last-operators": number[];
  };
  platform: { "device-configuration": string };
  preferences: { "preferred-media": string[] };
  provenance: string;
}

export interface CollabView {
  "collab-id": number;
  "session-id": number;
  "expert-id": string;
  state: string;
  "indication-count": number;
  snapshot?: {
    context: ContextView;
    "step-cursor": number;
    "recent-events": TraceEventView[];
  };
}

export interface TagRef {
  kind: string;
  "tag-id": number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parse<T>(response: Response): Promise<T> {
  const text = await response.text();
  const doc = text ? JSON.parse(text) : {};
  if (!response.ok) {
    throw new ApiError(response.status, doc as ErrorBody);
  }
  return doc as T;
}

export function createClient(baseUrl: string, fetchImpl?: FetchLike) {
  const doFetch: FetchLike = fetchImpl ?? ((url, init) => fetch(url, init));
  const base = baseUrl.replace(/\/$/, "");

  function get<T>(path: string): Promise<T> {
    return doFetch(`${base}${path}`).then((r) => parse<T>(r));
  }

  function post<T>(path: string, body?: unknown): Promise<T> {
    return doFetch(`${base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    }).then((r) => parse<T>(r));
  }

  return {
    health: () => get<{ status: string; events: number }>("/health"),
    listTags: () => get<{ tags: TagRef[] }>("/tags").then((d) => d.tags),
    listExperts: () =>
      get<{ experts: { "expert-id": string; name: string }[] }>("/experts").then(
        (d) => d.experts,
      ),
    listMachines: () =>
      get<{ machines: Record<string, unknown>[] }>("/machines").then((d) => d.machines),

    createSession: (badgeId: number, workflowId: number) =>
      post<SessionView>("/sessions", { "badge-id": badgeId, "workflow-id": workflowId }),
    getSession: (sid: number) => get<SessionView>(`/sessions/${sid}`),
    bind: (sid: number, machineId: number) =>
      post<{ session: SessionView; context: ContextView }>(`/sessions/${sid}/bind`, {
        "machine-id": machineId,
      }),
    scan: (sid: number, kind: string, tagId: number) =>
      post<{ outcome: ScanOutcomeView; session: SessionView }>(`/sessions/${sid}/scan`, {
        kind,
        "tag-id": tagId,
      }),
    reportDefect: (sid: number, partId: number, replacementId: number) =>
      post<{ session: SessionView }>(`/sessions/${sid}/defect`, {
        "part-id": partId,
        "replacement-id": replacementId,
      }),
    complete: (sid: number) =>
      post<{ record: Record<string, unknown>; session: SessionView }>(
        `/sessions/${sid}/complete`,
      ),
    abort: (sid: number) =>
      post<{ record: Record<string, unknown>; session: SessionView }>(`/sessions/${sid}/abort`),

    assist: (sid: number, expertId: string) =>
      post<CollabView>(`/sessions/${sid}/assist`, { "expert-id": expertId }),
    listCollabs: () => get<{ collabs: CollabView[] }>("/collab").then((d) => d.collabs),
    getCollab: (cid: number) => get<CollabView>(`/collab/${cid}`),
    sendIndication: (cid: number, kind: string, payload: Record<string, unknown>) =>
      post<{ seq: number }>(`/collab/${cid}/indications`, { kind, payload }),
    pollIndications: (cid: number, after: number, waitSeconds: number) =>
      get<{ state: string; indications: IndicationView[] }>(
        `/collab/${cid}/indications?after=${after}&wait=${waitSeconds}`,
      ),
    closeCollab: (cid: number) => post<CollabView>(`/collab/${cid}/close`),

    getContext: (machineId: number, mode?: string) =>
      get<ContextView>(
        `/machines/${machineId}/context${mode ? `?mode=${mode}` : ""}`,
      ),
    getConnectivity: () => get<{ mode: string }>("/connectivity"),
    setConnectivity: (mode: string) => post<{ mode: string }>("/connectivity", { mode }),

    traceParts: (id: number) =>
      get<{ events: TraceEventView[] }>(`/trace/parts/${id}`).then((d) => d.events),
    traceTools: (id: number) =>
      get<{ events: TraceEventView[] }>(`/trace/tools/${id}`).then((d) => d.events),
    traceSession: (sid: number) =>
      get<{ events: TraceEventView[] }>(`/trace/sessions/${sid}`).then((d) => d.events),
    digest: () => get<{ digest: string; events: number }>("/trace/digest"),
  };
}

export type Client = ReturnType<typeof createClient>;
