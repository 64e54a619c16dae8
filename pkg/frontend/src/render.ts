// Top-down vector rendering. Drawing goes through a minimal 2D-context
// interface so tests can substitute a recording stub for a real canvas.

import type { HelloMessage, TickFrame } from './protocol.js';
import type { RenderState } from './viewmodel.js';

export interface Draw2D {
  clear(width: number, height: number): void;
  line(points: [number, number][], width: number, color: string): void;
  circle(x: number, y: number, r: number, color: string, fill: boolean): void;
  poly(points: [number, number][], color: string): void;
  text(s: string, x: number, y: number, color: string): void;
}

export interface Viewport {
  width: number;
  height: number;
}

const COLORS = {
  pathEdge: '#3b4252',
  pathCenter: '#6b7280',
  robotAuto: '#35c46f',
  robotHuman: '#e4b32c',
  ped: '#e05263',
  goal: '#7aa2f7',
  text: '#c0caf5',
};

export class WorldTransform {
  readonly scale: number;
  private minX = 0;
  private minY = 0;
  private pad = 2.0;

  constructor(hello: HelloMessage, view: Viewport) {
    const xs = hello.path.map((p) => p[0]);
    const ys = hello.path.map((p) => p[1]);
    this.minX = Math.min(...xs) - this.pad;
    this.minY = Math.min(...ys) - this.pad;
    const spanX = Math.max(...xs) - this.minX + this.pad;
    const spanY = Math.max(...ys) - this.minY + this.pad;
    this.scale = Math.min(view.width / spanX, view.height / spanY);
  }

  toScreen(x: number, y: number, view: Viewport): [number, number] {
    // world y points up; screen y points down
    return [(x - this.minX) * this.scale,
            view.height - (y - this.minY) * this.scale];
  }
}

export function drawFrame(ctx: Draw2D, view: Viewport, hello: HelloMessage,
                          frame: TickFrame, state: RenderState): void {
  const tf = new WorldTransform(hello, view);
  const at = (x: number, y: number) => tf.toScreen(x, y, view);
  ctx.clear(view.width, view.height);

  // path ribbon: centerline plus offset edges
  const center = hello.path.map(([x, y]) => at(x, y));
  ctx.line(edgePoints(hello, +1).map(([x, y]) => at(x, y)), 2, COLORS.pathEdge);
  ctx.line(edgePoints(hello, -1).map(([x, y]) => at(x, y)), 2, COLORS.pathEdge);
  ctx.line(center, 1, COLORS.pathCenter);

  const goal = hello.path[hello.path.length - 1];
  ctx.circle(...at(goal[0], goal[1]), 0.35 * tf.scale, COLORS.goal, false);

  for (const ped of state.peds) {
    ctx.circle(...at(ped.x, ped.y), hello.ped_radius * tf.scale, COLORS.ped, true);
    ctx.line(headingTick(ped.x, ped.y, ped.heading, hello.ped_radius * 2)
      .map(([x, y]) => at(x, y)), 1, COLORS.ped);
  }

  const color = frame.mode === 'human_control' ? COLORS.robotHuman : COLORS.robotAuto;
  ctx.circle(...at(state.robot.x, state.robot.y),
             hello.robot_radius * tf.scale, color, true);
  ctx.line(headingTick(state.robot.x, state.robot.y, state.robot.heading,
                       hello.robot_radius * 2.5).map(([x, y]) => at(x, y)),
           2, color);

  // steering indicator: wedge showing the executed action's bin
  const span = frame.action.steer_bin / (hello.n_steer - 1) - 0.5;
  const angle = state.robot.heading + span * (100 * Math.PI / 180);
  ctx.line(headingTick(state.robot.x, state.robot.y, angle, 1.0)
    .map(([x, y]) => at(x, y)), 1, COLORS.text);
}

function edgePoints(hello: HelloMessage, side: number): [number, number][] {
  const pts = hello.path;
  const out: [number, number][] = [];
  for (let i = 0; i < pts.length; i++) {
    const a = pts[Math.max(i - 1, 0)];
    const b = pts[Math.min(i + 1, pts.length - 1)];
    const heading = Math.atan2(b[1] - a[1], b[0] - a[0]);
    out.push([
      pts[i][0] - side * hello.half_width * Math.sin(heading),
      pts[i][1] + side * hello.half_width * Math.cos(heading),
    ]);
  }
  return out;
}

function headingTick(x: number, y: number, heading: number,
                     length: number): [number, number][] {
  return [[x, y], [x + length * Math.cos(heading), y + length * Math.sin(heading)]];
}

export function statusLine(frame: TickFrame | null, paused: boolean,
                           dropped: number): string {
  if (!frame) return 'waiting for first frame';
  const bits = [
    `tick ${frame.tick}`,
    `ep ${frame.episode}`,
    frame.mode === 'human_control' ? 'HUMAN' : 'auto',
    `scenario ${frame.scenario}`,
    `δ ${frame.delta_len}/${frame.delta_capacity}`,
    `interventions ${frame.interventions}`,
  ];
  if (paused) bits.push('PAUSED');
  if (frame.events.length) bits.push(`events: ${frame.events.join(',')}`);
  if (dropped) bits.push(`dropped ${dropped}`);
  return bits.join('  ');
}
