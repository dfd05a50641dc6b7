/** View state for one copilot session, driven by a pure reducer.
 *
 * The UI derives nothing: xml/svg/dsl/description are stored exactly as the
 * server returned them, and a failed turn must not touch the diagram pane.
 */

import type { SessionPayload } from "./api.js";

export type Role = "user" | "assistant" | "system" | "error";

export interface ChatEntry {
  role: Role;
  text: string;
  details?: string[];
}

export interface SessionView {
  sessionId: string | null;
  xml: string;
  svg: string;
  dsl: string;
  description: string;
  transcript: ChatEntry[];
  busy: boolean;
}

export const EMPTY_VIEW: SessionView = {
  sessionId: null,
  xml: "",
  svg: "",
  dsl: "",
  description: "",
  transcript: [],
  busy: false,
};

export type ViewEvent =
  | { kind: "session-started"; payload: SessionPayload }
  | { kind: "session-imported"; payload: SessionPayload }
  | { kind: "prompt-submitted"; prompt: string }
  | { kind: "turn-succeeded"; payload: SessionPayload }
  | { kind: "turn-failed"; message: string; details?: string[] };

function artifacts(payload: SessionPayload) {
  return {
    sessionId: payload.id,
    xml: payload.xml,
    svg: payload.svg,
    dsl: payload.dsl,
    description: payload.description,
  };
}

export function reduce(view: SessionView, event: ViewEvent): SessionView {
  switch (event.kind) {
    case "session-started":
      return {
        ...EMPTY_VIEW,
        ...artifacts(event.payload),
        transcript: [{ role: "system", text: "New session started." }],
      };
    case "session-imported":
      return {
        ...EMPTY_VIEW,
        ...artifacts(event.payload),
        transcript: [
          {
            role: "system",
            text: `Imported an existing P&ID:\n${event.payload.description}`,
          },
        ],
      };
    case "prompt-submitted":
      return {
        ...view,
        busy: true,
        transcript: [...view.transcript, { role: "user", text: event.prompt }],
      };
    case "turn-succeeded":
      return {
        ...view,
        ...artifacts(event.payload),
        busy: false,
        transcript: [
          ...view.transcript,
          { role: "assistant", text: event.payload.description },
        ],
      };
    case "turn-failed":
      // error bubble only; diagram and inspector panes keep the last good state
      return {
        ...view,
        busy: false,
        transcript: [
          ...view.transcript,
          { role: "error", text: event.message, details: event.details ?? [] },
        ],
      };
  }
}

/** Guard used by the input box: one active turn per session. */
export function canSubmit(view: SessionView, prompt: string): boolean {
  return view.sessionId !== null && !view.busy && prompt.trim().length > 0;
}
