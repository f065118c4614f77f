import { describe, expect, it } from "vitest";

import { parseServerMessage } from "../src/protocol.js";
import { acceptBroadcast, initialUiState, TargetStream } from "../src/state.js";
import type { StateBroadcast } from "../src/protocol.js";

function frame(tick: number, episode = 1): StateBroadcast {
  return {
    type: "state",
    tick,
    episode_id: episode,
    task_id: "Touch",
    paddle: { pos: [0, -0.7], vel: [0, 0], radius: 0.05 },
    puck: { pos: [0, 0], vel: [0, 0], radius: 0.03 },
    objects: [],
    goal: null,
    reward: 0,
    episode_return: 0,
    recording: false,
    success: false,
    done: false,
  };
}

describe("TargetStream", () => {
  it("sends at most one target per control period, latest sample wins", () => {
    const stream = new TargetStream(50);
    stream.setSample(0.1, 0.1);
    stream.setSample(0.2, 0.2);
    stream.setSample(0.3, 0.3);
    expect(stream.takeDue(0)).toEqual([0.3, 0.3]);
    stream.setSample(0.4, 0.4);
    expect(stream.takeDue(20)).toBeNull();   // same period
    expect(stream.takeDue(49.9)).toBeNull();
    expect(stream.takeDue(50)).toEqual([0.4, 0.4]);
  });

  it("sends nothing without a fresh pointer sample", () => {
    const stream = new TargetStream(50);
    expect(stream.takeDue(1000)).toBeNull();
    stream.setSample(0, 0);
    expect(stream.takeDue(1050)).toEqual([0, 0]);
    expect(stream.takeDue(2000)).toBeNull(); // sample consumed
  });

  it("rejects a non-positive period", () => {
    expect(() => new TargetStream(0)).toThrow();
  });
});

describe("acceptBroadcast", () => {
  it("keeps only the newest frame and counts stale drops", () => {
    const ui = initialUiState();
    acceptBroadcast(ui, frame(5));
    acceptBroadcast(ui, frame(3));
    expect(ui.latest!.tick).toBe(5);
    expect(ui.framesDropped).toBe(1);
    acceptBroadcast(ui, frame(6));
    expect(ui.latest!.tick).toBe(6);
  });

  it("accepts a tick restart on a new episode", () => {
    const ui = initialUiState();
    acceptBroadcast(ui, frame(200, 1));
    acceptBroadcast(ui, frame(1, 2));
    expect(ui.latest!.episode_id).toBe(2);
  });
});

describe("parseServerMessage", () => {
  it("drops malformed frames", () => {
    expect(parseServerMessage("not json")).toBeNull();
    expect(parseServerMessage("42")).toBeNull();
    expect(parseServerMessage('{"type":"state","tick":1}')).toBeNull();
  });

  it("accepts a well-formed state frame", () => {
    const msg = parseServerMessage(JSON.stringify(frame(9)));
    expect(msg).not.toBeNull();
    expect((msg as StateBroadcast).tick).toBe(9);
  });

  it("passes through acks", () => {
    const msg = parseServerMessage('{"type":"ack","ok":false,"detail":"read-only"}');
    expect(msg).toEqual({ type: "ack", ok: false, detail: "read-only" });
  });
});
