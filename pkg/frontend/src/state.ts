// UI state store: latest-frame snapshots plus strip-chart history.
// The socket handler only writes here; rendering reads on animation ticks and
// must never block on the network. Data older than STALE_AFTER seconds gets a
// staleness badge instead of silently freezing the picture.

import type { HelloFrame, Limits, MapFrame, StateFrame } from "./protocol";

export const STALE_AFTER = 0.5; // seconds without a state frame
const STRIP_WINDOW = 30.0;      // seconds of strip-chart history

export interface StripSample {
  t: number;
  value: number;
}

export class StripSeries {
  samples: StripSample[] = [];

  push(t: number, value: number): void {
    const n = this.samples.length;
    if (n > 0 && t <= this.samples[n - 1].t) return; // replays don't regress
    this.samples.push({ t, value });
    const cutoff = t - STRIP_WINDOW;
    while (this.samples.length > 0 && this.samples[0].t < cutoff) {
      this.samples.shift();
    }
  }

  latest(): number | null {
    return this.samples.length ? this.samples[this.samples.length - 1].value : null;
  }
}

export class UiState {
  hello: HelloFrame | null = null;
  state: StateFrame | null = null;
  map: MapFrame | null = null;
  connected = false;
  lastError = "";
  activeCmd = { vx: 0, vy: 0, yaw_rate: 0 };
  minDistance = new StripSeries();
  solveMs = new StripSeries();
  baseHeight = new StripSeries();
  private lastStateWall: number | null = null;

  limits(): Limits {
    if (this.state) return this.state.limits;
    if (this.hello) return this.hello.limits;
    return { vx: 1, vy: 1, yaw_rate: 1 };
  }

  onStateFrame(frame: StateFrame, wallNow: number): void {
    this.state = frame;
    this.lastStateWall = wallNow;
    this.minDistance.push(frame.t, frame.min_distance);
    this.solveMs.push(frame.t, frame.solve_ms);
    this.baseHeight.push(frame.t, frame.base.z);
  }

  onMapFrame(frame: MapFrame): void {
    this.map = frame;
  }

  onHello(frame: HelloFrame): void {
    this.hello = frame;
  }

  // Stale when connected but no fresh state within the budget, or when the
  // connection dropped entirely while data is on screen.
  isStale(wallNow: number): boolean {
    if (this.state === null) return false;
    if (!this.connected) return true;
    return this.lastStateWall === null ||
      wallNow - this.lastStateWall > STALE_AFTER;
  }
}
