// Client-side session state and the outbound target pacing.

import type { StateBroadcast } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface UiState {
  latest: StateBroadcast | null; // render uses only the newest broadcast
  status: ConnectionStatus;
  role: string;
  selectedTask: string;
  showVelocities: boolean;
  framesDropped: number;
}

export function initialUiState(): UiState {
  return {
    latest: null,
    status: "connecting",
    role: "viewer",
    selectedTask: "",
    showVelocities: false,
    framesDropped: 0,
  };
}

export function acceptBroadcast(state: UiState, msg: StateBroadcast): void {
  if (state.latest && msg.episode_id === state.latest.episode_id
      && msg.tick < state.latest.tick) {
    state.framesDropped += 1; // stale frame: ignore
    return;
  }
  state.latest = msg;
}

/**
 * Outbound target pacing: the pointer is sampled continuously but at most one
 * TargetCommand leaves per control period, carrying the latest sample.
 */
export class TargetStream {
  private periodMs: number;
  private sample: [number, number] | null = null;
  private lastSent = -Infinity;

  constructor(periodMs: number) {
    if (periodMs <= 0) throw new Error("period must be positive");
    this.periodMs = periodMs;
  }

  setSample(x: number, y: number): void {
    this.sample = [x, y];
  }

  /** The latest sample if a full period elapsed since the previous send, else null. */
  takeDue(nowMs: number): [number, number] | null {
    if (this.sample === null || nowMs - this.lastSent < this.periodMs) return null;
    this.lastSent = nowMs;
    const out = this.sample;
    this.sample = null;
    return out;
  }
}
