// Wire protocol shared with the gateway (docs/wire_protocol.md), version 1.
// Every inbound frame is guarded before it reaches application logic; a
// malformed frame is dropped, never thrown on.

export const PROTOCOL_VERSION = 1;

export interface RobotState {
  x: number;
  y: number;
  heading: number;
  speed: number;
}

export interface PedState {
  x: number;
  y: number;
  heading: number;
}

export interface ActionBins {
  steer_bin: number;
  speed_bin: number;
}

export interface HelloMessage {
  v: number;
  sid: string;
  seq: number;
  type: 'hello';
  scenario: string;
  seed: number;
  checkpoint_id: string;
  path: [number, number][];
  half_width: number;
  robot_radius: number;
  ped_radius: number;
  n_steer: number;
  n_speed: number;
  tick_seconds: number;
}

export interface TickFrame {
  v: number;
  sid: string;
  seq: number;
  type: 'tick';
  tick: number;
  episode: number;
  mode: 'autonomous' | 'human_control';
  robot: RobotState;
  peds: PedState[];
  scenario: string;
  action: ActionBins;
  policy_action: ActionBins;
  delta_len: number;
  delta_capacity: number;
  events: string[];
  interventions: number;
}

export interface AckMessage {
  v: number;
  sid: string;
  seq: number;
  type: 'ack';
  of_seq: number;
  of_type: string;
}

export interface ErrorMessage {
  v: number;
  sid: string;
  seq: number;
  type: 'error';
  error: string;
}

export type ServerMessage = HelloMessage | TickFrame | AckMessage | ErrorMessage;

export type ClientMessage =
  | { v: number; seq: number; type: 'seize' }
  | { v: number; seq: number; type: 'release' }
  | { v: number; seq: number; type: 'set_action'; steer_bin: number; speed_bin: number }
  | { v: number; seq: number; type: 'pause' }
  | { v: number; seq: number; type: 'resume' }
  | { v: number; seq: number; type: 'start_episode'; scenario: string; seed: number };

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === 'object' && x !== null && !Array.isArray(x);
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === 'number' && Number.isFinite(x);
}

function hasBase(m: Record<string, unknown>): boolean {
  return m.v === PROTOCOL_VERSION && typeof m.sid === 'string' && isFiniteNumber(m.seq);
}

function isRobot(x: unknown): x is RobotState {
  return isRecord(x) && isFiniteNumber(x.x) && isFiniteNumber(x.y)
    && isFiniteNumber(x.heading) && isFiniteNumber(x.speed);
}

function isPed(x: unknown): x is PedState {
  return isRecord(x) && isFiniteNumber(x.x) && isFiniteNumber(x.y)
    && isFiniteNumber(x.heading);
}

function isAction(x: unknown): x is ActionBins {
  return isRecord(x) && isFiniteNumber(x.steer_bin) && isFiniteNumber(x.speed_bin);
}

function isPathPoints(x: unknown): x is [number, number][] {
  return Array.isArray(x) && x.every(
    (p) => Array.isArray(p) && p.length === 2 && isFiniteNumber(p[0]) && isFiniteNumber(p[1]));
}

export function isTickFrame(x: unknown): x is TickFrame {
  if (!isRecord(x) || !hasBase(x) || x.type !== 'tick') return false;
  return isFiniteNumber(x.tick) && isFiniteNumber(x.episode)
    && (x.mode === 'autonomous' || x.mode === 'human_control')
    && isRobot(x.robot)
    && Array.isArray(x.peds) && x.peds.every(isPed)
    && typeof x.scenario === 'string'
    && isAction(x.action) && isAction(x.policy_action)
    && isFiniteNumber(x.delta_len) && isFiniteNumber(x.delta_capacity)
    && Array.isArray(x.events) && x.events.every((e) => typeof e === 'string')
    && isFiniteNumber(x.interventions);
}

export function isHello(x: unknown): x is HelloMessage {
  if (!isRecord(x) || !hasBase(x) || x.type !== 'hello') return false;
  return typeof x.scenario === 'string' && isFiniteNumber(x.seed)
    && typeof x.checkpoint_id === 'string'
    && isPathPoints(x.path)
    && isFiniteNumber(x.half_width) && isFiniteNumber(x.robot_radius)
    && isFiniteNumber(x.ped_radius)
    && isFiniteNumber(x.n_steer) && isFiniteNumber(x.n_speed)
    && isFiniteNumber(x.tick_seconds);
}

export function isAck(x: unknown): x is AckMessage {
  return isRecord(x) && hasBase(x) && x.type === 'ack'
    && isFiniteNumber(x.of_seq) && typeof x.of_type === 'string';
}

export function isErrorMessage(x: unknown): x is ErrorMessage {
  return isRecord(x) && hasBase(x) && x.type === 'error' && typeof x.error === 'string';
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let value: unknown;
  try {
    value = JSON.parse(raw);
  } catch {
    return null;
  }
  if (isTickFrame(value) || isHello(value) || isAck(value) || isErrorMessage(value)) {
    return value;
  }
  return null;
}

const CLIENT_TYPES = new Set(['seize', 'release', 'set_action', 'pause', 'resume', 'start_episode']);

// Outbound self-check: everything the console emits must satisfy this.
export function isValidClientMessage(x: unknown): x is ClientMessage {
  if (!isRecord(x) || x.v !== PROTOCOL_VERSION || !isFiniteNumber(x.seq)) return false;
  if (typeof x.type !== 'string' || !CLIENT_TYPES.has(x.type)) return false;
  if (x.type === 'set_action') {
    return Number.isInteger(x.steer_bin) && Number.isInteger(x.speed_bin);
  }
  if (x.type === 'start_episode') {
    return typeof x.scenario === 'string' && Number.isInteger(x.seed);
  }
  return true;
}
