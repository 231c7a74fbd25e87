/**
 * Live datastream monitor: chart series assembly and polling.
 *
 * Data always arrives through the SensorThings/dashboard endpoints
 * (never a side channel); charts poll at a configurable interval with
 * overlapping ticks skipped.
 */

import type { ApiClient } from "./api.js";
import type { Observation } from "./types.js";

export interface SeriesPoint {
  t: number; // epoch milliseconds
  value: number;
  flag: string;
}

export interface ChartState {
  datastreamId: number;
  title: string;
  rangeMs: number;
  refreshMs: number;
  flagOverlay: boolean;
  points: SeriesPoint[];
}

/** RFC3339 -> epoch ms; tolerates the backend's up-to-9-digit fractions
 * (Date.parse only takes milliseconds). */
export function parseTimeMs(value: string): number {
  const m = value.match(/^(.*T\d{2}:\d{2}:\d{2})(?:\.(\d+))?(Z|[+-]\d{2}:\d{2})$/);
  if (!m) return Date.parse(value);
  const frac = (m[2] ?? "").padEnd(3, "0").slice(0, 3);
  return Date.parse(`${m[1]}${frac ? "." + frac : ""}${m[3]}`);
}

export function toSeries(observations: Observation[]): SeriesPoint[] {
  return observations.map((obs) => ({
    t: parseTimeMs(obs.phenomenonTime),
    value: obs.result,
    flag: String(obs.parameters.flag ?? ""),
  }));
}

export function defaultChartState(datastreamId: number, title: string): ChartState {
  return {
    datastreamId,
    title,
    rangeMs: 7 * 24 * 3600 * 1000, // now-7d
    refreshMs: 5000,
    flagOverlay: true,
    points: [],
  };
}

type Timer = {
  set: (fn: () => void, ms: number) => unknown;
  clear: (handle: unknown) => void;
};

const defaultTimer: Timer = {
  set: (fn, ms) => setInterval(fn, ms),
  clear: (handle) => clearInterval(handle as number),
};

export class PanelPoller {
  fetches = 0;
  private handle: unknown = null;
  private inFlight = false;

  constructor(
    private api: ApiClient,
    private chart: ChartState,
    private onData: (points: SeriesPoint[]) => void,
    private timer: Timer = defaultTimer,
    private shareToken?: string,
    private dataUrl?: string,
  ) {}

  async tick(): Promise<void> {
    if (this.inFlight) return; // skip overlapping polls
    this.inFlight = true;
    this.fetches++;
    try {
      const page = this.dataUrl
        ? await this.api.fetchDataUrl(this.dataUrl)
        : await this.api.observations(
            this.chart.datastreamId,
            "$orderby=phenomenonTime desc&$top=500",
            this.shareToken);
      const points = toSeries(page.value).reverse();
      this.chart.points = points;
      this.onData(points);
    } finally {
      this.inFlight = false;
    }
  }

  start(): void {
    void this.tick();
    this.handle = this.timer.set(() => void this.tick(), this.chart.refreshMs);
  }

  stop(): void {
    if (this.handle !== null) this.timer.clear(this.handle);
    this.handle = null;
  }
}
