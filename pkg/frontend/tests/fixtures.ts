import type { RobotView, Snapshot } from "../src/protocol.js";

/** Snapshot shaped exactly like the control endpoint's world state frame. */
export function makeSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    tick: 0,
    time_s: 0,
    arena: [
      [0, 0],
      [1, 0],
      [1, 1],
      [0, 1],
    ],
    robots: [makeRobot(0, 0.3, 0.5), makeRobot(1, 0.5, 0.5), makeRobot(2, 0.7, 0.5)],
    objects: [],
    walls: [],
    shower: { id: 3, x: 0.6, y: 0.5, theta: Math.PI, cone_half_angle: Math.PI / 6, range: 0.5 },
    lights: [],
    in_flight: 0,
    stats: { delivered: 0, dropped: 0, transmitted: 0 },
    paused: true,
    timescale: 1,
    ...overrides,
  };
}

export function makeRobot(id: number, x: number, y: number): RobotView {
  return {
    id,
    x,
    y,
    theta: 0,
    radius: 0.03,
    program: "idle",
    halted: false,
    head_led: [0, 0, 0],
    belly: [
      [0, 0, 0],
      [0, 0, 0],
      [0, 0, 0],
      [0, 0, 0],
    ],
    duties: [0, 0],
  };
}
