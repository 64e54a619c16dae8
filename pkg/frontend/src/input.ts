// Keyboard mapping: space toggles seize/release, arrows pick steer/speed
// bins. Steering/speed edits coalesce into at most one set_action per tick,
// and controls are inert outside human control.

import type { ClientMessage } from './protocol.js';
import { PROTOCOL_VERSION } from './protocol.js';

export interface KeyEventLike {
  key: string;
}

export class InputController {
  private seq = 0;
  private pendingAction = false;
  private outbox: ClientMessage[] = [];
  steerBin: number;
  speedBin: number;

  constructor(private nSteer = 7, private nSpeed = 3,
              private getMode: () => string = () => 'unknown') {
    this.steerBin = Math.floor(nSteer / 2);
    this.speedBin = nSpeed - 1;
  }

  private push(msg: Omit<ClientMessage, 'v' | 'seq'>): void {
    this.seq += 1;
    this.outbox.push({ v: PROTOCOL_VERSION, seq: this.seq, ...msg } as ClientMessage);
  }

  /** Messages ready to send; draining preserves order. */
  drain(): ClientMessage[] {
    const out = this.outbox;
    this.outbox = [];
    return out;
  }

  onKey(event: KeyEventLike): void {
    const seized = this.getMode() === 'human_control';
    switch (event.key) {
      case ' ':
        this.push({ type: seized ? 'release' : 'seize' } as ClientMessage);
        break;
      case 'ArrowLeft':
      case 'ArrowRight': {
        if (!seized) return; // inert outside human control
        // positive steer angles turn left, so left raises the bin index
        this.steerBin = clamp(this.steerBin + (event.key === 'ArrowLeft' ? 1 : -1),
                              0, this.nSteer - 1);
        this.pendingAction = true;
        break;
      }
      case 'ArrowUp':
      case 'ArrowDown': {
        if (!seized) return;
        this.speedBin = clamp(this.speedBin + (event.key === 'ArrowUp' ? 1 : -1),
                              0, this.nSpeed - 1);
        this.pendingAction = true;
        break;
      }
      case 'p':
        this.push({ type: 'pause' } as ClientMessage);
        break;
      case 'r':
        this.push({ type: 'resume' } as ClientMessage);
        break;
      default:
        break;
    }
  }

  setSliders(steerBin: number, speedBin: number): void {
    if (this.getMode() !== 'human_control') return;
    this.steerBin = clamp(Math.round(steerBin), 0, this.nSteer - 1);
    this.speedBin = clamp(Math.round(speedBin), 0, this.nSpeed - 1);
    this.pendingAction = true;
  }

  /** Called once per received tick frame: flushes at most one coalesced
   * set_action no matter how many edits happened within the tick. */
  onTick(): void {
    if (!this.pendingAction) return;
    if (this.getMode() !== 'human_control') {
      this.pendingAction = false;
      return;
    }
    this.push({ type: 'set_action', steer_bin: this.steerBin,
                speed_bin: this.speedBin } as ClientMessage);
    this.pendingAction = false;
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}
