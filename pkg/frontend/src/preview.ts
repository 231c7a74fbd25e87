/**
 * Dry-run preview for the pipeline builder.
 *
 * Edits are debounced; responses arriving after a newer request are
 * dropped (cancel-on-newer); a draft that fails the card-level checks
 * never leaves the browser. Saving posts the exact serialized text --
 * the same bytes the preview validated -- to the attach endpoint.
 */

import type { ApiClient } from "./api.js";
import { cardProblems } from "./catalog.js";
import { serializeDraft, type PipelineDraft } from "./dsl.js";
import type { DryRunColumn, QcAttachmentDoc } from "./types.js";

export interface PreviewState {
  status: "idle" | "pending" | "ready" | "card-error" | "server-error";
  columns: DryRunColumn[];
  cardErrors: Record<number, Record<string, string>>;
  message?: string;
  /** flagged timestamps keyed per column index, for the chart overlay */
  overlay: Map<string, string>;
}

type Scheduler = {
  set: (fn: () => void, ms: number) => unknown;
  clear: (handle: unknown) => void;
};

const defaultScheduler: Scheduler = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as number),
};

export class PreviewController {
  state: PreviewState = { status: "idle", columns: [], cardErrors: {}, overlay: new Map() };
  requestsSent = 0;

  private seq = 0;
  private timer: unknown = null;

  constructor(
    private api: ApiClient,
    private datastreamId: number,
    private onChange: (state: PreviewState) => void = () => {},
    private debounceMs = 300,
    private scheduler: Scheduler = defaultScheduler,
  ) {}

  /** Debounced entry point for every builder edit. */
  update(draft: PipelineDraft): void {
    const cardErrors: Record<number, Record<string, string>> = {};
    draft.cards.forEach((card, index) => {
      const problems = cardProblems(card.func, card.kwargs);
      if (Object.keys(problems).length) cardErrors[index] = problems;
    });
    if (Object.keys(cardErrors).length) {
      this.setState({ status: "card-error", columns: [], cardErrors,
                      overlay: new Map() });
      return; // invalid card: no request leaves the client
    }
    if (this.timer !== null) this.scheduler.clear(this.timer);
    this.timer = this.scheduler.set(() => {
      void this.run(serializeDraft(draft));
    }, this.debounceMs);
  }

  private async run(text: string): Promise<void> {
    const mySeq = ++this.seq;
    this.setState({ ...this.state, status: "pending" });
    this.requestsSent++;
    try {
      const response = await this.api.qcDryrun(this.datastreamId, text);
      if (mySeq !== this.seq) return; // a newer request superseded this one
      const overlay = new Map<string, string>();
      for (const column of response.columns) {
        for (const entry of column.entries) {
          overlay.set(entry.phenomenonTime, entry.flag);
        }
      }
      this.setState({ status: "ready", columns: response.columns,
                      cardErrors: {}, overlay });
    } catch (error) {
      if (mySeq !== this.seq) return;
      this.setState({ status: "server-error", columns: [], cardErrors: {},
                      overlay: new Map(),
                      message: error instanceof Error ? error.message : String(error) });
    }
  }

  /** Persist the draft: the attach body is byte-identical to the
   * serialized draft the preview ran on. */
  async save(thingUuid: string, draft: PipelineDraft, lookback = "30d"):
      Promise<{ attachment: QcAttachmentDoc; sentText: string }> {
    const sentText = serializeDraft(draft);
    const attachment = await this.api.attachQc(thingUuid, sentText, lookback);
    return { attachment, sentText };
  }

  private setState(state: PreviewState): void {
    this.state = state;
    this.onChange(state);
  }
}
