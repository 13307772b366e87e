/**
 * Chat view state and the transitions server frames apply to it. Pure data,
 * no DOM: the widget renders from this and tests drive it directly.
 */

import type { OptionItem, ServerFrame } from "./protocol";

export type Connection = "connecting" | "open" | "closed" | "errored";

export type PendingInput =
  | { kind: "none" }
  | { kind: "open" }
  | { kind: "options"; options: OptionItem[] };

export interface Bubble {
  speaker: "system" | "learner";
  text: string;
}

export interface ChatViewState {
  messages: Bubble[];
  pendingInput: PendingInput;
  connection: Connection;
  ttsOn: boolean;
  sttActive: boolean;
  /** True between a learner send and the next server frame; blocks sends. */
  awaitingReply: boolean;
  sessionId: string | null;
  sessionStatus: string | null;
  /** Transient feedback (error codes, speech problems); cleared on activity. */
  notice: string | null;
  /** Text the server asked the client to speak, newest last. */
  spokenQueue: string[];
}

export function initialState(ttsOn: boolean): ChatViewState {
  return {
    messages: [],
    pendingInput: { kind: "none" },
    connection: "connecting",
    ttsOn,
    sttActive: false,
    awaitingReply: false,
    sessionId: null,
    sessionStatus: null,
    notice: null,
    spokenQueue: [],
  };
}

/** Apply one server frame. Mutates the state in place and reports whether
 * anything user-visible changed. */
export function applyServerFrame(state: ChatViewState, frame: ServerFrame): boolean {
  switch (frame.type) {
    case "session_start":
      state.sessionId = frame.payload.session_id;
      state.connection = "open";
      return true;
    case "system_message": {
      state.messages.push({ speaker: "system", text: frame.payload.text });
      state.awaitingReply = false;
      state.notice = null;
      if (frame.payload.input_mode === "options") {
        const options = frame.payload.options ?? [];
        state.pendingInput = options.length
          ? { kind: "options", options }
          : { kind: "none" };
      } else if (frame.payload.input_mode === "open") {
        state.pendingInput = { kind: "open" };
      } else {
        state.pendingInput = { kind: "none" };
      }
      if (state.ttsOn && frame.payload.tts) {
        state.spokenQueue.push(frame.payload.text);
      }
      return true;
    }
    case "session_end":
      state.sessionStatus = frame.payload.status;
      state.pendingInput = { kind: "none" };
      state.awaitingReply = false;
      state.connection = "closed";
      return true;
    case "error":
      state.notice = `${frame.payload.code}: ${frame.payload.message}`;
      // The gateway re-presents the current prompt after input errors, so
      // sends unblock on the frame that follows.
      state.awaitingReply = false;
      return true;
  }
}

export function canSubmitOpenText(state: ChatViewState): boolean {
  return (
    state.connection === "open" &&
    state.pendingInput.kind === "open" &&
    !state.awaitingReply
  );
}

export function canSubmitOption(state: ChatViewState, optionId: string): boolean {
  return (
    state.connection === "open" &&
    state.pendingInput.kind === "options" &&
    !state.awaitingReply &&
    state.pendingInput.options.some((option) => option.option_id === optionId)
  );
}

/** Record a learner submission: echo bubble plus the send lock. */
export function noteLearnerSend(state: ChatViewState, text: string): void {
  state.messages.push({ speaker: "learner", text });
  state.awaitingReply = true;
  state.notice = null;
}
