/**
 * Thin wrappers over the browser speech interfaces, behind small interfaces
 * so the widget can be tested with fakes and degrade cleanly where the
 * browser offers no speech support.
 */

export interface VoiceInfo {
  name: string;
  lang: string;
}

export interface Speaker {
  readonly supported: boolean;
  speak(text: string): void;
  listVoices(): VoiceInfo[];
  setVoice(name: string): void;
  cancel(): void;
}

export interface ListenResult {
  ok: boolean;
  text?: string;
  error?: string;
}

export interface Listener {
  readonly supported: boolean;
  /** One-shot recognition; exactly one callback invocation per start(). */
  start(onDone: (result: ListenResult) => void): void;
  stop(): void;
}

/** Text-to-speech over window.speechSynthesis, with a selectable voice
 * (the default system voice is not to everyone's taste). */
export class BrowserSpeaker implements Speaker {
  readonly supported: boolean;
  private voiceName: string | null = null;

  constructor() {
    this.supported =
      typeof window !== "undefined" && "speechSynthesis" in window &&
      typeof SpeechSynthesisUtterance !== "undefined";
  }

  listVoices(): VoiceInfo[] {
    if (!this.supported) return [];
    return window.speechSynthesis
      .getVoices()
      .map((voice) => ({ name: voice.name, lang: voice.lang }));
  }

  setVoice(name: string): void {
    this.voiceName = name;
  }

  speak(text: string): void {
    if (!this.supported) return;
    const utterance = new SpeechSynthesisUtterance(text);
    if (this.voiceName) {
      const voice = window.speechSynthesis
        .getVoices()
        .find((candidate) => candidate.name === this.voiceName);
      if (voice) utterance.voice = voice;
    }
    window.speechSynthesis.speak(utterance);
  }

  cancel(): void {
    if (this.supported) window.speechSynthesis.cancel();
  }
}

type RecognitionCtor = new () => {
  lang: string;
  interimResults: boolean;
  maxAlternatives: number;
  onresult: ((event: { results: { [i: number]: { [j: number]: { transcript: string } } } }) => void) | null;
  onerror: ((event: { error: string }) => void) | null;
  onend: (() => void) | null;
  start(): void;
  stop(): void;
};

function recognitionCtor(): RecognitionCtor | null {
  if (typeof window === "undefined") return null;
  const w = window as unknown as {
    SpeechRecognition?: RecognitionCtor;
    webkitSpeechRecognition?: RecognitionCtor;
  };
  return w.SpeechRecognition ?? w.webkitSpeechRecognition ?? null;
}

/** Speech-to-text over the browser recognition interface. Recognized text is
 * handed back for review, never auto-sent. */
export class BrowserListener implements Listener {
  readonly supported: boolean;
  private active: ReturnType<RecognitionCtor["prototype"]["constructor"]> | null = null;

  constructor(private lang: string = "en-US") {
    this.supported = recognitionCtor() !== null;
  }

  start(onDone: (result: ListenResult) => void): void {
    const Ctor = recognitionCtor();
    if (!Ctor) {
      onDone({ ok: false, error: "speech recognition unsupported" });
      return;
    }
    const recognition = new Ctor();
    this.active = recognition;
    recognition.lang = this.lang;
    recognition.interimResults = false;
    recognition.maxAlternatives = 1;
    let settled = false;
    const settle = (result: ListenResult) => {
      if (!settled) {
        settled = true;
        this.active = null;
        onDone(result);
      }
    };
    recognition.onresult = (event) => {
      const transcript = event.results[0]?.[0]?.transcript ?? "";
      settle({ ok: true, text: transcript });
    };
    recognition.onerror = (event) => settle({ ok: false, error: event.error });
    recognition.onend = () => settle({ ok: false, error: "no speech detected" });
    recognition.start();
  }

  stop(): void {
    this.active?.stop();
  }
}
