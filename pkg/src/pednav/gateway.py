"""Live intervention session: simulation loop + bidirectional wire protocol.

A session steps the world at a fixed logical tick rate. A human client can
seize control, steer, and release; the first human action after a seize is
treated as the expert correction at the intervention step and fed through
the same trace-queue/backtrack pipeline the headless training loop uses,
with later actions during the hold logged as plain expert samples. Ticks
are logically numbered, so wall-clock jitter never alters world evolution,
and a recorded session log re-ingests to the identical dataset delta.
"""
from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass
from pathlib import Path

from .checkpoint import checkpoint_hash, load_checkpoint
from .expert import meta_label
from .imitation import PROV_EXPERT, TraceEntry, TraceQueue, BacktrackSchedule, backtrack
from .policy import LabeledSample, PolicyBundle, act, soft_label
from .sim.scenarios import Simulator
from .sim.sensor import observe
from .sim.world import Action, N_SPEED, N_STEER, STOP_ACTION, ScenarioId, World

PROTOCOL_VERSION = 1

CLIENT_TYPES = ("seize", "release", "set_action", "pause", "resume", "start_episode")

AUTONOMOUS = "autonomous"
HUMAN_CONTROL = "human_control"

_SCENARIO_BY_VALUE = {s.value: s for s in ScenarioId}


@dataclass(frozen=True)
class SessionConfig:
    scenario: ScenarioId = ScenarioId.CROSS
    seed: int = 0
    road_seed: int | None = None
    queue_len: int = 50
    schedule_kind: str = "linear"
    sigma: float = 0.5
    w_floor: float = 0.05
    auto_restart: bool = True
    session_id: str = "session"
    checkpoint_path: str | None = None
    checkpoint_id: str = ""


def validate_client_message(raw) -> tuple[dict | None, str | None]:
    """Parse + schema-check one inbound message; never raises.

    Returns (message, None) or (None, reason)."""
    if isinstance(raw, (bytes, bytearray)):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError:
            return None, "not utf-8"
    if isinstance(raw, str):
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            return None, "not valid JSON"
    else:
        msg = raw
    if not isinstance(msg, dict):
        return None, "message must be an object"
    if msg.get("v") != PROTOCOL_VERSION:
        return None, f"unsupported protocol version {msg.get('v')!r}"
    if not isinstance(msg.get("seq"), int):
        return None, "missing integer seq"
    mtype = msg.get("type")
    if mtype not in CLIENT_TYPES:
        return None, f"unknown message type {mtype!r}"
    if mtype == "set_action":
        steer, speed = msg.get("steer_bin"), msg.get("speed_bin")
        if not (isinstance(steer, int) and 0 <= steer < N_STEER):
            return None, f"steer_bin must be an integer in [0, {N_STEER})"
        if not (isinstance(speed, int) and 0 <= speed < N_SPEED):
            return None, f"speed_bin must be an integer in [0, {N_SPEED})"
    if mtype == "start_episode":
        if msg.get("scenario") not in _SCENARIO_BY_VALUE:
            return None, f"unknown scenario {msg.get('scenario')!r}"
        if not isinstance(msg.get("seed"), int):
            return None, "start_episode needs an integer seed"
    return msg, None


class GatewaySession:
    """Deterministic tick-driven session; network transport lives elsewhere."""

    def __init__(self, bundle: PolicyBundle, sim: Simulator, config: SessionConfig,
                 log_path=None):
        self.bundle = bundle
        self.sim = sim
        self.config = config
        self.schedule = BacktrackSchedule(config.schedule_kind, config.queue_len)
        self.store_delta: list[LabeledSample] = []
        self.mode = AUTONOMOUS
        self.paused = False
        self.tick_index = 0
        self.out_seq = 0       # tick frames only: contiguous, checked on re-ingestion
        self.ctrl_seq = 0      # hello/ack/error replies: monotone, separate stream
        self.episode = 0
        self.intervention_count = 0
        self.held_action: Action | None = None
        self.awaiting_anchor = False
        self._log = None
        if log_path is not None:
            self._log = Path(log_path).open("w")
            self._log_line({"type": "session-header", "v": PROTOCOL_VERSION,
                            "sid": config.session_id,
                            "scenario": config.scenario.value,
                            "seed": config.seed,
                            "road_seed": config.road_seed,
                            "queue_len": config.queue_len,
                            "schedule": config.schedule_kind,
                            "sigma": config.sigma,
                            "w_floor": config.w_floor,
                            "auto_restart": config.auto_restart,
                            "checkpoint": config.checkpoint_path,
                            "checkpoint_id": config.checkpoint_id})
        self._start_episode(config.scenario, config.seed, config.road_seed)

    # -- episode / mode management -------------------------------------------

    def _start_episode(self, scenario: ScenarioId, seed: int,
                       road_seed: int | None) -> None:
        self.world = self.sim.spawn(scenario, seed, road_seed=road_seed)
        self.queue = TraceQueue(self.config.queue_len)
        self.mode = AUTONOMOUS
        self.held_action = None
        self.awaiting_anchor = False
        self.episode += 1
        self._episode_seed = seed

    def handle_message(self, raw, applied_tick: int | None = None) -> list[dict]:
        """Apply one client message; returns reply messages (ack or error)."""
        msg, reason = validate_client_message(raw)
        if msg is None:
            return [self._reply("error", error=reason)]
        if self._log is not None:
            self._log_line({"dir": "in", "tick": self.tick_index
                            if applied_tick is None else applied_tick, **msg})
        mtype = msg["type"]
        if mtype == "seize":
            if self.mode == AUTONOMOUS:
                self.mode = HUMAN_CONTROL
                self.awaiting_anchor = True
                self.held_action = None
        elif mtype == "release":
            if self.mode == HUMAN_CONTROL:
                self.mode = AUTONOMOUS
                self.awaiting_anchor = False
                self.held_action = None
                self.queue.clear()
        elif mtype == "set_action":
            if self.mode == HUMAN_CONTROL:
                action = Action(msg["steer_bin"], msg["speed_bin"])
                if self.awaiting_anchor:
                    self._anchor_intervention(action)
                self.held_action = action
        elif mtype == "pause":
            self.paused = True
        elif mtype == "resume":
            self.paused = False
        elif mtype == "start_episode":
            self._start_episode(_SCENARIO_BY_VALUE[msg["scenario"]], msg["seed"],
                                self.config.road_seed)
        return [self._reply("ack", of_seq=msg["seq"], of_type=mtype)]

    def _anchor_intervention(self, human_action: Action) -> None:
        """First human action after a seize: the expert correction at step t."""
        obs = observe(self.world)
        _, proposed = act(self.bundle, obs)
        self.queue.append(TraceEntry(obs, proposed, self.world.t))
        scenario = meta_label(self.world)
        samples = backtrack(self.queue, human_action, proposed, self.schedule,
                            scenario=scenario, sigma=self.config.sigma,
                            w_floor=self.config.w_floor, iteration=self.episode)
        self.store_delta.extend(samples)
        self.intervention_count += 1
        self.awaiting_anchor = False

    # -- simulation loop ------------------------------------------------------

    def tick(self) -> dict | None:
        """Advance one logical step; returns the outbound frame (None if paused)."""
        if self.paused:
            return None
        if self.world.terminated:
            if not self.config.auto_restart:
                return None
            self._start_episode(self.world.config.scenario,
                                self._episode_seed + 1, self.config.road_seed)
        obs = observe(self.world)
        _, policy_action = act(self.bundle, obs)
        if self.mode == HUMAN_CONTROL:
            executed = self.held_action if self.held_action is not None else STOP_ACTION
            if not self.awaiting_anchor and self.held_action is not None:
                self.store_delta.append(LabeledSample(
                    obs, meta_label(self.world),
                    target=soft_label(executed, self.config.sigma),
                    provenance=PROV_EXPERT, iteration=self.episode))
        else:
            executed = policy_action
            self.queue.append(TraceEntry(obs, policy_action, self.world.t))
        outcome = self.world.step(executed)
        self.tick_index += 1
        frame = self._frame(executed, policy_action, outcome)
        if self._log is not None:
            self._log_line({"dir": "out", **frame})
        return frame

    def _frame(self, executed: Action, policy_action: Action, outcome) -> dict:
        self.out_seq += 1
        r = self.world.robot
        return {
            "v": PROTOCOL_VERSION,
            "sid": self.config.session_id,
            "seq": self.out_seq,
            "type": "tick",
            "tick": self.tick_index,
            "episode": self.episode,
            "mode": self.mode,
            "robot": {"x": r.x, "y": r.y, "heading": r.heading,
                      "speed": self.world.robot_speed},
            "peds": [{"x": p.x, "y": p.y, "heading": p.heading}
                     for p in self.world.peds],
            "scenario": outcome.ground_truth_scenario.value,
            "action": {"steer_bin": executed.steer_bin,
                       "speed_bin": executed.speed_bin},
            "policy_action": {"steer_bin": policy_action.steer_bin,
                              "speed_bin": policy_action.speed_bin},
            "delta_len": len(self.queue),
            "delta_capacity": self.config.queue_len,
            "events": sorted(e.value for e in outcome.events),
            "interventions": self.intervention_count,
        }

    def hello(self) -> dict:
        """Handshake frame: static session/world facts for the client."""
        self.ctrl_seq += 1
        return {
            "v": PROTOCOL_VERSION,
            "sid": self.config.session_id,
            "seq": self.ctrl_seq,
            "type": "hello",
            "scenario": self.config.scenario.value,
            "seed": self.config.seed,
            "checkpoint_id": self.config.checkpoint_id,
            "path": [[float(x), float(y)] for x, y in self.world.config.path_points],
            "half_width": self.world.config.half_width,
            "robot_radius": self.world.config.robot_radius,
            "ped_radius": self.world.config.ped_radius,
            "n_steer": N_STEER,
            "n_speed": N_SPEED,
            "tick_seconds": self.world.config.time_step,
        }

    def _reply(self, mtype: str, **fields) -> dict:
        self.ctrl_seq += 1
        return {"v": PROTOCOL_VERSION, "sid": self.config.session_id,
                "seq": self.ctrl_seq, "type": mtype, **fields}

    def _log_line(self, obj: dict) -> None:
        self._log.write(json.dumps(obj, sort_keys=True) + "\n")
        self._log.flush()

    def close(self) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None


def reingest_log(log_path, bundle: PolicyBundle, sim: Simulator) -> list[LabeledSample]:
    """Replay a session log offline, reproducing its exact dataset delta.

    Sequence-number gaps in the logged outbound frames abort the ingestion;
    silent repair would hide lost data.
    """
    lines = [json.loads(line) for line in Path(log_path).read_text().splitlines()
             if line.strip()]
    if not lines or lines[0].get("type") != "session-header":
        raise ValueError(f"{log_path}: missing session header")
    header = lines[0]
    config = SessionConfig(
        scenario=_SCENARIO_BY_VALUE[header["scenario"]],
        seed=header["seed"],
        road_seed=header["road_seed"],
        queue_len=header["queue_len"],
        schedule_kind=header["schedule"],
        sigma=header["sigma"],
        w_floor=header["w_floor"],
        auto_restart=header["auto_restart"],
        session_id=header["sid"],
    )
    out_seqs = [entry["seq"] for entry in lines[1:] if entry.get("dir") == "out"]
    for prev, cur in zip(out_seqs, out_seqs[1:]):
        if cur != prev + 1:
            raise ValueError(
                f"{log_path}: outbound sequence gap ({prev} -> {cur}); "
                "refusing silent repair")
    ticks = max((entry["tick"] for entry in lines[1:] if entry.get("dir") == "out"),
                default=0)
    inbound_by_tick: dict[int, list] = {}
    for entry in lines[1:]:
        if entry.get("dir") == "in":
            msg = {k: v for k, v in entry.items() if k not in ("dir", "tick")}
            inbound_by_tick.setdefault(entry["tick"], []).append(msg)
    session = GatewaySession(bundle, sim, config)
    while session.tick_index < ticks:
        for msg in inbound_by_tick.pop(session.tick_index, []):
            session.handle_message(msg)
        frame = session.tick()
        if frame is None:
            break  # stayed paused / halted; the live session emitted no more frames
    for msg in inbound_by_tick.pop(session.tick_index, []):
        session.handle_message(msg)
    return session.store_delta


def record_session(session: GatewaySession) -> str | None:
    """Path of the session's log file (None when logging is disabled)."""
    if session._log is None:
        return None
    return session._log.name


async def _serve_async(session: GatewaySession, port: int, tick_rate: float,
                       ready=None, stop=None):
    import websockets

    clients: set = set()
    commands: asyncio.Queue = asyncio.Queue()

    async def handler(ws):
        clients.add(ws)
        try:
            await ws.send(json.dumps(session.hello()))
            async for raw in ws:
                await commands.put((ws, raw))
        finally:
            clients.discard(ws)
            if not clients and session.mode == HUMAN_CONTROL:
                session.paused = True

    async def loop():
        period = 1.0 / tick_rate
        while stop is None or not stop.is_set():
            while not commands.empty():
                ws, raw = commands.get_nowait()
                for reply in session.handle_message(raw):
                    await _send(ws, json.dumps(reply))
            frame = session.tick()
            if frame is not None:
                payload = json.dumps(frame)
                for ws in list(clients):
                    await _send(ws, payload)
            await asyncio.sleep(period)

    async def _send(ws, payload: str):
        try:
            await ws.send(payload)
        except Exception:
            clients.discard(ws)

    server = await websockets.serve(handler, "127.0.0.1", port)
    actual_port = server.sockets[0].getsockname()[1]
    if ready is not None:
        ready.set_result(actual_port)
    try:
        await loop()
    finally:
        server.close()
        await server.wait_closed()


def serve_session(checkpoint, scenario: ScenarioId, seed: int, port: int,
                  sim: Simulator | None = None, road_seed: int | None = None,
                  log_path=None, tick_rate: float = 10.0, static_dir=None) -> None:
    """Blocking entry point used by the CLI."""
    bundle = load_checkpoint(checkpoint)
    config = SessionConfig(
        scenario=scenario, seed=seed, road_seed=road_seed,
        session_id=f"{scenario.value}-{seed}",
        checkpoint_path=str(checkpoint),
        checkpoint_id=checkpoint_hash(checkpoint)[:12],
    )
    session = GatewaySession(bundle, sim or Simulator(), config, log_path=log_path)
    if static_dir is not None:
        _serve_static(static_dir)
    print(f"serving {config.session_id} on ws://127.0.0.1:{port} "
          f"(checkpoint {config.checkpoint_id})")
    try:
        asyncio.run(_serve_async(session, port, tick_rate))
    finally:
        session.close()


def _serve_static(static_dir, http_port: int = 8080) -> None:
    import functools
    import http.server
    import threading

    handler = functools.partial(http.server.SimpleHTTPRequestHandler,
                                directory=str(static_dir))
    httpd = http.server.ThreadingHTTPServer(("127.0.0.1", http_port), handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    print(f"console assets on http://127.0.0.1:{http_port}")
