/**
 * The chat widget: renders system bubbles, presents option buttons or a
 * free-text box depending on the current prompt's input mode, speaks
 * prompts marked for TTS, and captures speech into the text box for review.
 *
 * Every outbound frame corresponds to one explicit user action; the widget
 * never fabricates messages. One send may be outstanding at a time: input
 * stays disabled until the next server frame.
 */

import {
  optionFrame,
  parseServerFrame,
  textFrame,
  type LearnerMessageFrame,
  type ServerFrame,
} from "./protocol";
import { BrowserListener, BrowserSpeaker, type Listener, type Speaker } from "./speech";
import {
  applyServerFrame,
  canSubmitOpenText,
  canSubmitOption,
  initialState,
  noteLearnerSend,
  type ChatViewState,
} from "./state";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onerror: ((event: unknown) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface WidgetOptions {
  url: string;
  tts?: boolean;
  socketFactory?: SocketFactory;
  speaker?: Speaker;
  listener?: Listener;
}

export interface FrameLogEntry {
  direction: "in" | "out";
  frame: ServerFrame | LearnerMessageFrame;
}

const defaultSocketFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

export class ChatWidget {
  readonly state: ChatViewState;
  private readonly speaker: Speaker;
  private readonly listener: Listener;
  private readonly socketFactory: SocketFactory;
  private socket: SocketLike | null = null;
  private renderedBubbles = 0;

  private readonly banner: HTMLElement;
  private readonly messagesBox: HTMLElement;
  private readonly optionsBox: HTMLElement;
  private readonly noticeBox: HTMLElement;
  private readonly statusBox: HTMLElement;
  private readonly inputRow: HTMLElement;
  private readonly textInput: HTMLInputElement;
  private readonly sendButton: HTMLButtonElement;
  private readonly micButton: HTMLButtonElement;
  private readonly voicePicker: HTMLSelectElement;

  constructor(private readonly container: HTMLElement, private readonly options: WidgetOptions) {
    this.state = initialState(options.tts ?? true);
    this.speaker = options.speaker ?? new BrowserSpeaker();
    this.listener = options.listener ?? new BrowserListener();
    this.socketFactory = options.socketFactory ?? defaultSocketFactory;

    container.classList.add("rb-widget");
    container.innerHTML = "";

    this.banner = el("div", "rb-banner");
    this.banner.hidden = true;
    this.messagesBox = el("div", "rb-messages");
    this.optionsBox = el("div", "rb-options");
    this.noticeBox = el("div", "rb-notice");
    this.noticeBox.hidden = true;
    this.statusBox = el("div", "rb-status");
    this.statusBox.hidden = true;

    this.inputRow = el("div", "rb-input-row");
    this.micButton = el("button", "rb-mic") as HTMLButtonElement;
    this.micButton.type = "button";
    this.micButton.textContent = "🎤";
    this.micButton.setAttribute("aria-label", "speak your answer");
    this.textInput = el("input", "rb-text") as HTMLInputElement;
    this.textInput.type = "text";
    this.textInput.placeholder = "Type your answer…";
    this.sendButton = el("button", "rb-send") as HTMLButtonElement;
    this.sendButton.type = "button";
    this.sendButton.textContent = "Send";
    if (this.listener.supported) {
      this.inputRow.appendChild(this.micButton);
    }
    this.inputRow.appendChild(this.textInput);
    this.inputRow.appendChild(this.sendButton);

    this.voicePicker = el("select", "rb-voice") as HTMLSelectElement;
    this.voicePicker.setAttribute("aria-label", "robot voice");
    const toolbar = el("div", "rb-toolbar");
    toolbar.appendChild(this.voicePicker);

    container.appendChild(this.banner);
    container.appendChild(this.messagesBox);
    container.appendChild(this.optionsBox);
    container.appendChild(this.noticeBox);
    container.appendChild(this.statusBox);
    container.appendChild(this.inputRow);
    container.appendChild(toolbar);

    this.sendButton.addEventListener("click", () => this.submitOpenText(this.textInput.value));
    this.textInput.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") this.submitOpenText(this.textInput.value);
    });
    this.micButton.addEventListener("click", () => this.captureSpeech());

    this.populateVoices();
    this.voicePicker.addEventListener("change", () => {
      this.speaker.setVoice(this.voicePicker.value);
    });

    this.render();
  }

  /** Open the websocket and start the session. */
  connect(): void {
    this.state.connection = "connecting";
    this.banner.hidden = true;
    let socket: SocketLike;
    try {
      socket = this.socketFactory(this.options.url);
    } catch {
      this.showConnectionError();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      // session_start confirms the session; the socket being open is enough
      // to stop showing "connecting".
      this.render();
    };
    socket.onmessage = (event) => {
      const frame = parseServerFrame(String(event.data));
      if (frame) this.handleServerFrame(frame);
    };
    socket.onerror = () => this.showConnectionError();
    socket.onclose = () => {
      if (this.state.connection !== "closed" && this.state.connection !== "errored") {
        this.showConnectionError();
      }
    };
  }

  /** Apply a recorded frame log without any socket: inbound frames update
   * the view, outbound learner frames render as echo bubbles. Nothing is
   * ever sent during a replay. */
  replayFrameLog(log: FrameLogEntry[]): void {
    for (const entry of log) {
      if (entry.direction === "in") {
        this.handleServerFrame(entry.frame as ServerFrame);
      } else {
        this.echoLearnerFrame(entry.frame as LearnerMessageFrame);
      }
    }
  }

  submitOpenText(text: string): void {
    const trimmed = text.trim();
    if (!trimmed || !canSubmitOpenText(this.state)) return;
    this.sendFrame(textFrame(trimmed));
    noteLearnerSend(this.state, trimmed);
    this.textInput.value = "";
    this.render();
  }

  submitOption(optionId: string): void {
    if (!canSubmitOption(this.state, optionId)) return;
    const options = this.state.pendingInput.kind === "options"
      ? this.state.pendingInput.options
      : [];
    const chosen = options.find((option) => option.option_id === optionId);
    this.sendFrame(optionFrame(optionId));
    noteLearnerSend(this.state, chosen?.label ?? optionId);
    this.render();
  }

  /** Listen once and put the transcript into the text box for review. */
  captureSpeech(): void {
    if (!this.listener.supported || this.state.pendingInput.kind !== "open") return;
    this.state.sttActive = true;
    this.render();
    this.listener.start((result) => {
      this.state.sttActive = false;
      if (result.ok && result.text) {
        this.textInput.value = result.text;
      } else {
        this.state.notice = `speech input failed: ${result.error ?? "unknown"}`;
      }
      this.render();
    });
  }

  dispose(): void {
    this.socket?.close();
    this.speaker.cancel();
  }

  // -- internals ------------------------------------------------------------

  private sendFrame(frame: LearnerMessageFrame): void {
    this.socket?.send(JSON.stringify(frame));
  }

  private echoLearnerFrame(frame: LearnerMessageFrame): void {
    const payload = frame.payload as { text?: string; option_id?: string };
    let text = payload.text ?? payload.option_id ?? "";
    if (payload.option_id && this.state.pendingInput.kind === "options") {
      const match = this.state.pendingInput.options.find(
        (option) => option.option_id === payload.option_id,
      );
      if (match) text = match.label;
    }
    noteLearnerSend(this.state, text);
    this.render();
  }

  private handleServerFrame(frame: ServerFrame): void {
    applyServerFrame(this.state, frame);
    while (this.state.spokenQueue.length) {
      const text = this.state.spokenQueue.shift();
      if (text) this.speaker.speak(text);
    }
    this.render();
  }

  private showConnectionError(): void {
    this.state.connection = "errored";
    this.banner.hidden = false;
    this.banner.innerHTML = "";
    this.banner.appendChild(document.createTextNode("Connection lost. "));
    const retry = el("button", "rb-retry") as HTMLButtonElement;
    retry.type = "button";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => this.retry());
    this.banner.appendChild(retry);
    this.render();
  }

  private retry(): void {
    this.socket?.close();
    const keepTts = this.state.ttsOn;
    Object.assign(this.state, initialState(keepTts));
    this.messagesBox.innerHTML = "";
    this.renderedBubbles = 0;
    this.statusBox.hidden = true;
    this.connect();
    this.render();
  }

  private populateVoices(): void {
    const voices = this.speaker.supported ? this.speaker.listVoices() : [];
    this.voicePicker.innerHTML = "";
    if (!voices.length) {
      this.voicePicker.hidden = true;
      return;
    }
    for (const voice of voices) {
      const option = document.createElement("option");
      option.value = voice.name;
      option.textContent = `${voice.name} (${voice.lang})`;
      this.voicePicker.appendChild(option);
    }
  }

  private render(): void {
    // Append bubbles added since the last render.
    for (const bubble of this.state.messages.slice(this.renderedBubbles)) {
      const node = el("div", `rb-bubble rb-${bubble.speaker}`);
      node.textContent = bubble.text;
      this.messagesBox.appendChild(node);
    }
    this.renderedBubbles = this.state.messages.length;

    // Option buttons exist exactly when the prompt asks for a selection.
    this.optionsBox.innerHTML = "";
    if (this.state.pendingInput.kind === "options") {
      for (const option of this.state.pendingInput.options) {
        const button = el("button", "rb-option") as HTMLButtonElement;
        button.type = "button";
        button.dataset.optionId = option.option_id;
        button.textContent = option.label;
        button.disabled = this.state.awaitingReply || this.state.connection !== "open";
        button.addEventListener("click", () => this.submitOption(option.option_id));
        this.optionsBox.appendChild(button);
      }
    }

    const openEnabled = canSubmitOpenText(this.state);
    this.textInput.disabled = !openEnabled;
    this.sendButton.disabled = !openEnabled;
    this.micButton.disabled = !openEnabled || this.state.sttActive;
    this.inputRow.hidden = this.state.pendingInput.kind !== "open";

    this.noticeBox.hidden = this.state.notice === null;
    this.noticeBox.textContent = this.state.notice ?? "";

    if (this.state.sessionStatus !== null) {
      this.statusBox.hidden = false;
      this.statusBox.textContent = `session ${this.state.sessionStatus}`;
    }
    this.container.dataset.connection = this.state.connection;
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
