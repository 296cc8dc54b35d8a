// WebSocket wrapper: parse-validate incoming frames, schema-check outgoing
// ones, reconnect with backoff. The handler only mutates UiState; rendering
// never waits on this.

import { CmdFrame, CtrlFrame, parseServerFrame, validateOutgoing }
  from "./protocol";
import { UiState } from "./state";

export class Bridge {
  private ws: WebSocket | null = null;
  private url: string;
  private ui: UiState;
  onMapChanged: (() => void) | null = null;

  constructor(url: string, ui: UiState) {
    this.url = url;
    this.ui = ui;
  }

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.ui.connected = true;
    };
    this.ws.onclose = () => {
      this.ui.connected = false;
      setTimeout(() => this.connect(), 1000);
    };
    this.ws.onerror = () => {
      this.ui.connected = false;
    };
    this.ws.onmessage = (ev) => this.handle(String(ev.data));
  }

  handle(text: string): void {
    const frame = parseServerFrame(text);
    if (!frame) return;
    switch (frame.type) {
      case "hello":
        this.ui.onHello(frame);
        break;
      case "state":
        this.ui.onStateFrame(frame, performance.now() / 1000);
        break;
      case "map":
        this.ui.onMapFrame(frame);
        if (this.onMapChanged) this.onMapChanged();
        break;
      case "error":
        this.ui.lastError = frame.message;
        break;
    }
  }

  send(frame: CmdFrame | CtrlFrame): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) return false;
    if (!validateOutgoing(frame)) return false;
    this.ws.send(JSON.stringify(frame));
    return true;
  }
}
