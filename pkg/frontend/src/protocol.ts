/**
 * Wire protocol spoken with the dialogue gateway: JSON text frames of shape
 * {type, payload}. The widget only ever sends learner_message frames, with
 * exactly one of {text} or {option_id} in the payload.
 */

export interface OptionItem {
  option_id: string;
  label: string;
}

export type InputMode = "open" | "options" | "none";

export interface SystemMessagePayload {
  text: string;
  node_id: string;
  input_mode: InputMode;
  options?: OptionItem[];
  tts: boolean;
}

export interface SessionStartPayload {
  session_id: string;
  scenario_id: string;
}

export interface SessionEndPayload {
  session_id: string;
  status: string;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

export type ServerFrame =
  | { type: "session_start"; payload: SessionStartPayload }
  | { type: "system_message"; payload: SystemMessagePayload }
  | { type: "session_end"; payload: SessionEndPayload }
  | { type: "error"; payload: ErrorPayload };

export interface LearnerMessageFrame {
  type: "learner_message";
  payload: { text: string } | { option_id: string };
}

export function textFrame(text: string): LearnerMessageFrame {
  return { type: "learner_message", payload: { text } };
}

export function optionFrame(optionId: string): LearnerMessageFrame {
  return { type: "learner_message", payload: { option_id: optionId } };
}

/** Parse one inbound frame; returns null for anything unusable. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const frame = data as { type?: unknown; payload?: unknown };
  if (typeof frame.type !== "string") return null;
  if (typeof frame.payload !== "object" || frame.payload === null) return null;
  const payload = frame.payload as Record<string, unknown>;
  switch (frame.type) {
    case "session_start":
      if (typeof payload.session_id !== "string") return null;
      return { type: "session_start", payload: payload as unknown as SessionStartPayload };
    case "system_message": {
      if (typeof payload.text !== "string" || typeof payload.input_mode !== "string")
        return null;
      const mode = payload.input_mode as InputMode;
      if (mode !== "open" && mode !== "options" && mode !== "none") return null;
      if (mode === "options" && !Array.isArray(payload.options)) return null;
      return { type: "system_message", payload: payload as unknown as SystemMessagePayload };
    }
    case "session_end":
      if (typeof payload.status !== "string") return null;
      return { type: "session_end", payload: payload as unknown as SessionEndPayload };
    case "error":
      if (typeof payload.code !== "string") return null;
      return { type: "error", payload: payload as unknown as ErrorPayload };
    default:
      return null;
  }
}
