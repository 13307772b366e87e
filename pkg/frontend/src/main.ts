/**
 * Host-page entry point: reads ?ws=<url>&tts=<0|1> from the query string,
 * mounts the widget, and connects.
 */

import { ChatWidget } from "./widget";

export function boot(container: HTMLElement, search: string = window.location.search): ChatWidget {
  const params = new URLSearchParams(search);
  const url = params.get("ws") ?? "ws://127.0.0.1:8020/ws";
  const tts = params.get("tts") !== "0";
  const widget = new ChatWidget(container, { url, tts });
  widget.connect();
  return widget;
}

const mount = typeof document !== "undefined" ? document.getElementById("chat") : null;
if (mount) {
  boot(mount);
}
