// Gateway connection with reconnect backoff. The socket constructor is
// injectable so tests drive the client with a scripted fake.

import type { ClientMessage } from './protocol.js';
import { isValidClientMessage } from './protocol.js';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHooks {
  onRaw(data: unknown): void;
  onStatus(status: 'connecting' | 'connected' | 'closed'): void;
}

export class GatewayClient {
  private socket: SocketLike | null = null;
  private retry = 0;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  sent = 0;
  rejectedOutbound = 0;

  constructor(private url: string, private factory: SocketFactory,
              private hooks: ClientHooks,
              private backoffMs: number[] = [250, 500, 1000, 2000, 5000]) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    this.hooks.onStatus('connecting');
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retry = 0;
      this.hooks.onStatus('connected');
    };
    socket.onmessage = (event) => this.hooks.onRaw(event.data);
    socket.onclose = () => this.scheduleReconnect();
    socket.onerror = () => { /* close always follows */ };
  }

  private scheduleReconnect(): void {
    this.socket = null;
    this.hooks.onStatus('closed');
    if (this.closed) return;
    const delay = this.backoffMs[Math.min(this.retry, this.backoffMs.length - 1)];
    this.retry += 1;
    this.timer = setTimeout(() => this.open(), delay);
  }

  /** Sends only messages that validate against the shared schema. */
  send(message: ClientMessage): boolean {
    if (!isValidClientMessage(message) || this.socket === null) {
      this.rejectedOutbound += isValidClientMessage(message) ? 0 : 1;
      return false;
    }
    this.socket.send(JSON.stringify(message));
    this.sent += 1;
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    if (this.socket) this.socket.close();
    this.socket = null;
  }
}
