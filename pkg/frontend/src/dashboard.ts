/**
 * Shared dashboard view model: the token is the capability, the
 * descriptor fixes the panels, each panel refreshes through its
 * token-scoped data URL.
 */

import type { ApiClient } from "./api.js";
import { PanelPoller, defaultChartState, type ChartState } from "./monitor.js";
import type { DashboardDescriptor } from "./types.js";

export interface SharedPanel {
  chart: ChartState;
  poller: PanelPoller;
}

export async function loadSharedDashboard(
  api: ApiClient,
  shareToken: string,
  onData: (datastreamId: number) => void,
): Promise<{ descriptor: DashboardDescriptor; panels: SharedPanel[] }> {
  const descriptor = await api.getDashboard(shareToken);
  const panels = descriptor.panels.map((panel) => {
    const chart = defaultChartState(panel.datastream_id, panel.title);
    const poller = new PanelPoller(
      api, chart,
      () => onData(panel.datastream_id),
      undefined,
      undefined,
      panel.data_url,
    );
    return { chart, poller };
  });
  return { descriptor, panels };
}
