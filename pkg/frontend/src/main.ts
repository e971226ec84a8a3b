// Browser entry point: mount the app against the bridge's WebSocket endpoint.

import { mount } from "./app";
import { WebSocketTransport } from "./transport";

mount(document, {
  makeTransport: () => new WebSocketTransport(`ws://${location.host}/ws`),
});
