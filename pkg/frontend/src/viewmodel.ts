// Session view model: the single source the renderer and input logic read.
// Mode always mirrors the last server frame; interpolation never runs past
// the newest frame (no extrapolation).

import type { HelloMessage, PedState, RobotState, ServerMessage, TickFrame } from './protocol.js';
import { parseServerMessage } from './protocol.js';

export type ConnectionStatus = 'connecting' | 'connected' | 'closed';

export interface RenderState {
  robot: RobotState;
  peds: PedState[];
  alpha: number; // interpolation position in [0, 1] between prev and latest
}

export class ViewModel {
  hello: HelloMessage | null = null;
  latest: TickFrame | null = null;
  previous: TickFrame | null = null;
  status: ConnectionStatus = 'connecting';
  frameCount = 0;
  droppedFrames = 0;
  paused = false;
  lastError = '';
  seizeRequested = false;
  steerBin = 3;
  speedBin = 2;

  get mode(): 'autonomous' | 'human_control' | 'unknown' {
    return this.latest ? this.latest.mode : 'unknown';
  }

  get interventions(): number {
    return this.latest ? this.latest.interventions : 0;
  }

  ingest(message: ServerMessage): void {
    switch (message.type) {
      case 'hello':
        this.hello = message;
        break;
      case 'tick':
        this.previous = this.latest;
        this.latest = message;
        this.frameCount += 1;
        this.paused = false;
        if (message.mode === 'autonomous') {
          this.seizeRequested = false;
          // track what the policy is doing so a seize starts from it
          this.steerBin = message.action.steer_bin;
          this.speedBin = message.action.speed_bin;
        }
        break;
      case 'ack':
        if (message.of_type === 'pause') this.paused = true;
        if (message.of_type === 'resume') this.paused = false;
        break;
      case 'error':
        this.lastError = message.error;
        break;
    }
  }

  ingestRaw(raw: unknown): boolean {
    // counts schema-invalid frames instead of surfacing them
    if (typeof raw !== 'string') {
      this.droppedFrames += 1;
      return false;
    }
    const parsed = parse(raw);
    if (parsed === null) {
      this.droppedFrames += 1;
      return false;
    }
    this.ingest(parsed);
    return true;
  }

  /** Render state at a display instant `elapsed` seconds after the latest
   * frame arrived; clamped so the view never leads the simulation. */
  renderState(elapsedSinceLatest: number): RenderState | null {
    if (!this.latest) return null;
    const tick = this.hello ? this.hello.tick_seconds : 0.1;
    if (!this.previous || this.paused) {
      return { robot: this.latest.robot, peds: this.latest.peds, alpha: 1 };
    }
    const alpha = Math.min(Math.max(elapsedSinceLatest / tick, 0), 1);
    const lerp = (a: number, b: number) => a + (b - a) * alpha;
    const robot: RobotState = {
      x: lerp(this.previous.robot.x, this.latest.robot.x),
      y: lerp(this.previous.robot.y, this.latest.robot.y),
      heading: this.latest.robot.heading,
      speed: this.latest.robot.speed,
    };
    const peds = this.latest.peds.map((p, i) => {
      const was = this.previous && this.previous.peds[i];
      return was
        ? { x: lerp(was.x, p.x), y: lerp(was.y, p.y), heading: p.heading }
        : p;
    });
    return { robot, peds, alpha };
  }
}

function parse(raw: string) {
  return parseServerMessage(raw);
}
