import { describe, expect, it } from 'vitest';

import { ViewModel } from '../src/viewmodel.js';
import { makeHello, makeTick, rng } from './helpers.js';

function primed(): ViewModel {
  const vm = new ViewModel();
  vm.ingest(makeHello());
  return vm;
}

describe('view model', () => {
  it('tracks the last acknowledged server mode, not local wishes', () => {
    const vm = primed();
    vm.seizeRequested = true;
    expect(vm.mode).toBe('unknown');
    vm.ingest(makeTick({ mode: 'autonomous' }));
    expect(vm.mode).toBe('autonomous');
    vm.ingest(makeTick({ mode: 'human_control', seq: 3, tick: 2 }));
    expect(vm.mode).toBe('human_control');
  });

  it('counts frames and rejects schema-violating ones', () => {
    const vm = primed();
    expect(vm.ingestRaw(JSON.stringify(makeTick()))).toBe(true);
    expect(vm.ingestRaw('garbage')).toBe(false);
    expect(vm.ingestRaw(JSON.stringify({ bogus: 1 }))).toBe(false);
    expect(vm.ingestRaw(1234 as unknown as string)).toBe(false);
    expect(vm.frameCount).toBe(1);
    expect(vm.droppedFrames).toBe(3);
  });

  it('replays a 500-frame recorded session without violations', () => {
    const vm = primed();
    const rand = rng(7);
    let x = 0;
    for (let t = 1; t <= 500; t++) {
      x += 0.15;
      const frame = makeTick({
        seq: t + 1, tick: t,
        robot: { x, y: Math.sin(t / 30) * 0.3, heading: 0.01 * t % 1, speed: 1.5 },
        peds: rand() < 0.5 ? [] : [{ x: x + 3, y: 1 - t * 0.01, heading: -1.5 }],
      });
      expect(vm.ingestRaw(JSON.stringify(frame))).toBe(true);
    }
    expect(vm.frameCount).toBe(500);
    expect(vm.droppedFrames).toBe(0);
    expect(vm.latest?.tick).toBe(500);
  });

  it('interpolates between the last two frames, never beyond the newest', () => {
    const vm = primed();
    vm.ingest(makeTick({ tick: 1, robot: { x: 1, y: 0, heading: 0, speed: 1.5 } }));
    vm.ingest(makeTick({ tick: 2, seq: 3, robot: { x: 2, y: 0, heading: 0, speed: 1.5 } }));
    const mid = vm.renderState(0.05)!; // half a tick after the newest frame
    expect(mid.robot.x).toBeCloseTo(1.5, 9);
    const late = vm.renderState(5.0)!; // way past one tick: clamp, no extrapolation
    expect(late.robot.x).toBeCloseTo(2.0, 9);
    expect(late.alpha).toBe(1);
    const early = vm.renderState(-1)!;
    expect(early.robot.x).toBeCloseTo(1.0, 9);
  });

  it('freezes on the last frame while paused', () => {
    const vm = primed();
    vm.ingest(makeTick({ tick: 1 }));
    vm.ingest(makeTick({ tick: 2, seq: 3, robot: { x: 9, y: 0, heading: 0, speed: 0 } }));
    vm.ingest({ v: 1, sid: 's', seq: 4, type: 'ack', of_seq: 9, of_type: 'pause' });
    expect(vm.paused).toBe(true);
    const state = vm.renderState(0.03)!;
    expect(state.robot.x).toBe(9);
    expect(state.alpha).toBe(1);
  });

  it('remembers the policy action while autonomous as the seize baseline', () => {
    const vm = primed();
    vm.ingest(makeTick({ action: { steer_bin: 5, speed_bin: 1 } }));
    expect(vm.steerBin).toBe(5);
    expect(vm.speedBin).toBe(1);
  });

  it('tracks intervention count from frames', () => {
    const vm = primed();
    vm.ingest(makeTick({ interventions: 4 }));
    expect(vm.interventions).toBe(4);
  });
});
