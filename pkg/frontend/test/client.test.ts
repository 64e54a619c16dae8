import { describe, expect, it, vi } from 'vitest';

import { GatewayClient, type SocketLike } from '../src/client.js';

class FakeSocket implements SocketLike {
  static instances: FakeSocket[] = [];
  sentData: string[] = [];
  onopen: (() => void) | null = null;
  onmessage: ((event: { data: unknown }) => void) | null = null;
  onclose: (() => void) | null = null;
  onerror: (() => void) | null = null;

  constructor(public url: string) {
    FakeSocket.instances.push(this);
  }

  send(data: string): void {
    this.sentData.push(data);
  }

  close(): void {
    this.onclose?.();
  }
}

function makeClient(statuses: string[], raws: unknown[] = []) {
  FakeSocket.instances = [];
  const client = new GatewayClient(
    'ws://test', (url) => new FakeSocket(url),
    {
      onRaw: (d) => raws.push(d),
      onStatus: (s) => statuses.push(s),
    },
    [10, 20, 40]);
  return client;
}

describe('gateway client', () => {
  it('reports connection lifecycle and forwards raw frames', () => {
    const statuses: string[] = [];
    const raws: unknown[] = [];
    const client = makeClient(statuses, raws);
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.onopen?.();
    sock.onmessage?.({ data: '{"x":1}' });
    expect(statuses).toEqual(['connecting', 'connected']);
    expect(raws).toEqual(['{"x":1}']);
    client.close();
  });

  it('reconnects with increasing backoff after close', () => {
    vi.useFakeTimers();
    try {
      const statuses: string[] = [];
      const client = makeClient(statuses);
      client.connect();
      FakeSocket.instances[0].onopen?.();
      FakeSocket.instances[0].onclose?.();
      expect(FakeSocket.instances.length).toBe(1);
      vi.advanceTimersByTime(10);
      expect(FakeSocket.instances.length).toBe(2);
      FakeSocket.instances[1].onclose?.();
      vi.advanceTimersByTime(9);
      expect(FakeSocket.instances.length).toBe(2); // second retry waits 20ms
      vi.advanceTimersByTime(11);
      expect(FakeSocket.instances.length).toBe(3);
      client.close();
    } finally {
      vi.useRealTimers();
    }
  });

  it('stops reconnecting once closed deliberately', () => {
    vi.useFakeTimers();
    try {
      const client = makeClient([]);
      client.connect();
      client.close();
      vi.advanceTimersByTime(1000);
      expect(FakeSocket.instances.length).toBe(1);
    } finally {
      vi.useRealTimers();
    }
  });

  it('sends only schema-valid messages', () => {
    const client = makeClient([]);
    client.connect();
    const sock = FakeSocket.instances[0];
    sock.onopen?.();
    expect(client.send({ v: 1, seq: 1, type: 'seize' })).toBe(true);
    expect(client.send({ v: 1, seq: 2, type: 'warp' } as never)).toBe(false);
    expect(sock.sentData.length).toBe(1);
    expect(client.rejectedOutbound).toBe(1);
    client.close();
  });
});
