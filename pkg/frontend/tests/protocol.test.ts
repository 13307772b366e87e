import { describe, expect, it } from "vitest";

import { optionFrame, parseServerFrame, textFrame } from "../src/protocol";

describe("frame building", () => {
  it("text frames carry only text", () => {
    expect(textFrame("by coding")).toEqual({
      type: "learner_message",
      payload: { text: "by coding" },
    });
  });

  it("option frames carry only option_id", () => {
    expect(optionFrame("yes")).toEqual({
      type: "learner_message",
      payload: { option_id: "yes" },
    });
  });
});

describe("frame parsing", () => {
  it("accepts well-formed system messages", () => {
    const frame = parseServerFrame(
      JSON.stringify({
        type: "system_message",
        payload: {
          text: "Pick",
          node_id: "n",
          input_mode: "options",
          options: [{ option_id: "yes", label: "Yes" }],
          tts: true,
        },
      }),
    );
    expect(frame?.type).toBe("system_message");
  });

  it.each([
    "not json",
    "42",
    JSON.stringify({ type: "mystery", payload: {} }),
    JSON.stringify({ type: "system_message" }),
    JSON.stringify({ type: "system_message", payload: { text: 1, input_mode: "open" } }),
    JSON.stringify({ type: "system_message", payload: { text: "x", input_mode: "weird" } }),
    JSON.stringify({ type: "system_message", payload: { text: "x", input_mode: "options" } }),
    JSON.stringify({ type: "session_end", payload: {} }),
  ])("rejects malformed input %#", (raw) => {
    expect(parseServerFrame(raw)).toBeNull();
  });
});
