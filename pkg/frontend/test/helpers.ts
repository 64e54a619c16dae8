import type { HelloMessage, TickFrame } from '../src/protocol.js';

export function makeHello(overrides: Partial<HelloMessage> = {}): HelloMessage {
  return {
    v: 1, sid: 's', seq: 1, type: 'hello',
    scenario: 'cross', seed: 0, checkpoint_id: 'abc123',
    path: [[0, 0], [4, 0.2], [8, 0.5], [12, 0.4]],
    half_width: 1.5, robot_radius: 0.3, ped_radius: 0.3,
    n_steer: 7, n_speed: 3, tick_seconds: 0.1,
    ...overrides,
  };
}

export function makeTick(overrides: Partial<TickFrame> = {}): TickFrame {
  return {
    v: 1, sid: 's', seq: 2, type: 'tick',
    tick: 1, episode: 1, mode: 'autonomous',
    robot: { x: 1, y: 0, heading: 0, speed: 1.5 },
    peds: [{ x: 5, y: 1, heading: -1.2 }],
    scenario: 'cross',
    action: { steer_bin: 3, speed_bin: 2 },
    policy_action: { steer_bin: 3, speed_bin: 2 },
    delta_len: 1, delta_capacity: 50,
    events: [], interventions: 0,
    ...overrides,
  };
}

/** Deterministic xorshift so fuzz tests are reproducible. */
export function rng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13; state >>>= 0;
    state ^= state >> 17;
    state ^= state << 5; state >>>= 0;
    return state / 0xffffffff;
  };
}
