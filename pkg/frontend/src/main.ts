/** DOM wiring: chat pane, live diagram, inspector tabs, import/download. */

import { ApiError, SessionApi } from "./api.js";
import { EMPTY_VIEW, SessionView, ViewEvent, canSubmit, reduce } from "./state.js";

type Tab = "diagram" | "xml" | "dsl" | "description";

const params = new URLSearchParams(window.location.search);
const serverInput = el<HTMLInputElement>("server-url");
serverInput.value = params.get("server") ?? "http://127.0.0.1:8080";

let api = new SessionApi(serverInput.value);
let view: SessionView = EMPTY_VIEW;
let activeTab: Tab = "diagram";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function apply(event: ViewEvent): void {
  view = reduce(view, event);
  render();
}

function render(): void {
  const transcript = el<HTMLDivElement>("transcript");
  transcript.replaceChildren(
    ...view.transcript.map((entry) => {
      const bubble = document.createElement("div");
      bubble.className = `bubble ${entry.role}`;
      bubble.textContent = entry.text;
      if (entry.details && entry.details.length) {
        const detail = document.createElement("pre");
        detail.textContent = entry.details.join("\n");
        bubble.appendChild(detail);
      }
      if (entry.role === "error") {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.className = "retry";
        retry.onclick = () => {
          const lastPrompt = [...view.transcript]
            .reverse()
            .find((e) => e.role === "user");
          if (lastPrompt) void submitPrompt(lastPrompt.text);
        };
        bubble.appendChild(retry);
      }
      return bubble;
    }),
  );
  transcript.scrollTop = transcript.scrollHeight;

  el<HTMLDivElement>("diagram").innerHTML = view.svg;
  el<HTMLPreElement>("inspector-xml").textContent = view.xml;
  el<HTMLPreElement>("inspector-dsl").textContent = view.dsl;
  el<HTMLPreElement>("inspector-description").textContent = view.description;

  const input = el<HTMLTextAreaElement>("prompt");
  input.disabled = view.busy || view.sessionId === null;
  el<HTMLButtonElement>("send").disabled = !canSubmit(view, input.value);
  el<HTMLSpanElement>("session-id").textContent = view.sessionId ?? "(none)";
  el<HTMLSpanElement>("busy").hidden = !view.busy;

  for (const tab of ["diagram", "xml", "dsl", "description"] as Tab[]) {
    el(`pane-${tab}`).hidden = tab !== activeTab;
    el(`tab-${tab}`).classList.toggle("active", tab === activeTab);
  }
}

async function startSession(): Promise<void> {
  api = new SessionApi(serverInput.value);
  try {
    apply({ kind: "session-started", payload: await api.createSession() });
  } catch (err) {
    apply({ kind: "turn-failed", message: describeError(err) });
  }
}

async function submitPrompt(prompt: string): Promise<void> {
  if (!canSubmit(view, prompt) || view.sessionId === null) return;
  const sessionId = view.sessionId;
  apply({ kind: "prompt-submitted", prompt });
  try {
    apply({ kind: "turn-succeeded", payload: await api.runTurn(sessionId, prompt) });
  } catch (err) {
    apply({
      kind: "turn-failed",
      message: describeError(err),
      details: err instanceof ApiError ? err.details : [],
    });
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

function download(filename: string, text: string, mime: string): void {
  const blob = new Blob([text], { type: mime });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = filename;
  link.click();
  URL.revokeObjectURL(link.href);
}

function wire(): void {
  el<HTMLButtonElement>("new-session").onclick = () => void startSession();
  serverInput.onchange = () => void startSession();

  const input = el<HTMLTextAreaElement>("prompt");
  input.oninput = () => {
    el<HTMLButtonElement>("send").disabled = !canSubmit(view, input.value);
  };
  const send = () => {
    const prompt = input.value;
    input.value = "";
    void submitPrompt(prompt);
  };
  el<HTMLButtonElement>("send").onclick = send;
  input.onkeydown = (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      send();
    }
  };

  for (const tab of ["diagram", "xml", "dsl", "description"] as Tab[]) {
    el(`tab-${tab}`).onclick = () => {
      activeTab = tab;
      render();
    };
  }

  el<HTMLButtonElement>("download-xml").onclick = async () => {
    if (view.sessionId === null) return;
    // the canonical bytes come from the server resource, not the view
    download("pid.dexpi.xml", await api.fetchXml(view.sessionId), "application/xml");
  };
  el<HTMLButtonElement>("download-svg").onclick = async () => {
    if (view.sessionId === null) return;
    download("pid.svg", await api.fetchSvg(view.sessionId), "image/svg+xml");
  };

  const importFile = el<HTMLInputElement>("import-file");
  el<HTMLButtonElement>("import-xml").onclick = () => importFile.click();
  importFile.onchange = async () => {
    const file = importFile.files?.[0];
    importFile.value = "";
    if (!file) return;
    try {
      apply({ kind: "session-imported", payload: await api.importXml(await file.text()) });
    } catch (err) {
      apply({
        kind: "turn-failed",
        message: describeError(err),
        details: err instanceof ApiError ? err.details : [],
      });
    }
  };
}

wire();
render();
void startSession();
