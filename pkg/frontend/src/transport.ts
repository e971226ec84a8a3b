// Transports carry whole lines; framing stays out of the controller so the
// browser (WebSocket via the bridge) and tests (raw TCP) share everything
// above this interface.

export interface Transport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export class LineBuffer {
  private rest = "";

  feed(chunk: string): string[] {
    this.rest += chunk;
    const parts = this.rest.split("\n");
    this.rest = parts.pop() ?? "";
    return parts.filter((p) => p.length > 0);
  }
}

export class WebSocketTransport implements Transport {
  private ws: WebSocket;
  private buf = new LineBuffer();
  private lineCb: (line: string) => void = () => {};
  private closeCb: () => void = () => {};
  private queue: string[] = [];
  private open = false;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.addEventListener("open", () => {
      this.open = true;
      for (const line of this.queue.splice(0)) this.ws.send(line);
    });
    this.ws.addEventListener("message", (ev) => {
      // the bridge sends one line per message, but tolerate batching
      for (const line of this.buf.feed(String(ev.data) + "\n")) this.lineCb(line);
    });
    this.ws.addEventListener("close", () => this.closeCb());
    this.ws.addEventListener("error", () => this.ws.close());
  }

  send(line: string): void {
    if (this.open) this.ws.send(line);
    else this.queue.push(line);
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.ws.close();
  }
}
