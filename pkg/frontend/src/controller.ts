// One session per tab, one request in flight at a time. Every operation is
// chained onto a single promise queue, so replies always pair with their
// requests and the view updates in send order.

import { actionFor, keyBindings } from "./keys";
import {
  closeRequest,
  createRequest,
  keyRequest,
  parseReply,
  stateRequest,
  ProtocolError,
  type CreateOptions,
  type Reply,
  type UiKeyAction,
} from "./protocol";
import type { Transport } from "./transport";
import {
  applyDisconnect,
  applyProtocolError,
  applyReply,
  emptyView,
  sessionLive,
  type UiSessionView,
} from "./view";

class Disconnected extends Error {}

export class SessionController {
  private current: UiSessionView = emptyView();
  private bindings = keyBindings([]);
  private waiting: { resolve: (line: string) => void; reject: (err: Error) => void }[] = [];
  private chain: Promise<unknown> = Promise.resolve();

  constructor(
    private transport: Transport,
    private onView: (view: UiSessionView) => void = () => {},
  ) {
    transport.onLine((line) => {
      const slot = this.waiting.shift();
      if (slot) slot.resolve(line);
      // a reply with no waiter would mean the server broke request/reply
      // pairing; dropping it beats corrupting the pairing for later requests
    });
    transport.onClose(() => {
      this.current = applyDisconnect(this.current);
      for (const slot of this.waiting.splice(0)) slot.reject(new Disconnected());
      this.emit();
    });
  }

  get view(): UiSessionView {
    return this.current;
  }

  // Resolves once every operation queued so far has finished.
  flush(): Promise<void> {
    return this.chain.then(
      () => undefined,
      () => undefined,
    );
  }

  private emit(): void {
    this.onView(this.current);
  }

  private roundtrip(msg: object): Promise<Reply> {
    if (this.current.connection === "closed") {
      return Promise.reject(new Disconnected());
    }
    return new Promise<string>((resolve, reject) => {
      this.waiting.push({ resolve, reject });
      this.transport.send(JSON.stringify(msg));
    }).then(parseReply);
  }

  private enqueue(op: () => Promise<void>): Promise<UiSessionView> {
    const guarded = async () => {
      try {
        await op();
      } catch (err) {
        if (err instanceof ProtocolError) {
          this.current = applyProtocolError(this.current, err.message);
        } else if (!(err instanceof Disconnected)) {
          throw err;
        }
        // disconnects already froze the view in the onClose handler
      }
      this.emit();
    };
    const done = this.chain.then(guarded, guarded);
    this.chain = done;
    return done.then(() => this.current);
  }

  private apply(reply: Reply): void {
    this.current = applyReply(this.current, reply);
  }

  private get live(): boolean {
    return sessionLive(this.current);
  }

  // Starts a fresh session, closing the previous one first: condition
  // changes always go through here, never into a running session.
  start(opts: CreateOptions): Promise<UiSessionView> {
    return this.enqueue(async () => {
      if (this.live && this.current.session) {
        this.apply(await this.roundtrip(closeRequest(this.current.session)));
      }
      const reply = await this.roundtrip(createRequest(opts));
      this.current = applyReply(emptyView(), reply);
      if (reply.tag === "created") {
        this.bindings = keyBindings(reply.keys);
      }
    });
  }

  // Maps a physical key; unbound keys send nothing at all. Bound keys do a
  // key roundtrip, then refresh the session snapshot so the metrics readout
  // stays server-computed.
  press(physicalKey: string): Promise<UiSessionView> {
    const action: UiKeyAction | null = actionFor(this.bindings, physicalKey);
    if (action === null || !this.live) {
      return this.flush().then(() => this.current);
    }
    return this.enqueue(async () => {
      if (!this.live || !this.current.session) return;
      const session = this.current.session;
      this.apply(await this.roundtrip(keyRequest(session, action)));
      this.emit();
      this.apply(await this.roundtrip(stateRequest(session)));
    });
  }

  // Ends the session; the closing reply carries the final metrics.
  finish(): Promise<UiSessionView> {
    return this.enqueue(async () => {
      if (!this.live || !this.current.session) return;
      this.apply(await this.roundtrip(closeRequest(this.current.session)));
    });
  }

  refresh(): Promise<UiSessionView> {
    return this.enqueue(async () => {
      if (!this.live || !this.current.session) return;
      this.apply(await this.roundtrip(stateRequest(this.current.session)));
    });
  }
}
