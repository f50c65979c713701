// Session flow state machine, kept free of DOM concerns so the submission
// contract is testable headlessly.
//
// Invariants enforced here:
//  - at most one response is sent per displayed query: choose() flips the
//    state to "submitting" synchronously, so re-entrant calls (double
//    clicks) are dropped before any request goes out;
//  - the wire winner index is exactly the clicked card's 1-based position;
//  - a rejected or failed submission reverts to the displayed query so the
//    user can retry, still without a duplicate in flight.

import { ApiClient, ApiError, NextQueryResponse } from "./api.js";

export type Phase =
  | "idle"
  | "loading"
  | "awaiting_choice"
  | "submitting"
  | "done"
  | "error";

export interface ControllerEvent {
  phase: Phase;
  current: NextQueryResponse | null;
  error: string | null;
}

export class SessionController {
  phase: Phase = "idle";
  current: NextQueryResponse | null = null;
  error: string | null = null;
  submitted = 0;

  private listeners: Array<(e: ControllerEvent) => void> = [];

  constructor(
    private api: ApiClient,
    public sessionId: string,
  ) {}

  onChange(listener: (e: ControllerEvent) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const event: ControllerEvent = {
      phase: this.phase,
      current: this.current,
      error: this.error,
    };
    for (const listener of this.listeners) listener(event);
  }

  async loadNext(): Promise<void> {
    if (this.phase === "loading" || this.phase === "submitting") return;
    this.phase = "loading";
    this.error = null;
    this.emit();
    try {
      const next = await this.api.nextQuery(this.sessionId);
      this.current = next;
      this.phase = next.done ? "done" : "awaiting_choice";
    } catch (err) {
      this.error = describe(err);
      this.phase = "error";
    }
    this.emit();
  }

  /** Submit the 1-based candidate position. Returns true when the answer
   * was recorded. Calls while a submission is in flight are ignored. */
  async choose(winner: number): Promise<boolean> {
    if (this.phase !== "awaiting_choice" || !this.current?.query) return false;
    const candidates = this.current.query.candidates.length;
    if (!Number.isInteger(winner) || winner < 1 || winner > candidates) {
      this.error = `winner must be in 1..${candidates}`;
      this.emit();
      return false;
    }
    this.phase = "submitting";
    this.emit();
    try {
      await this.api.submitResponse(this.sessionId, winner);
      this.submitted += 1;
      this.current = null;
      this.phase = "idle";
      this.error = null;
      this.emit();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // the server has no pending query: our answer already landed, or the
        // displayed query is stale; reconcile instead of re-sending
        this.current = null;
        this.phase = "idle";
        this.error = null;
        this.emit();
        return false;
      }
      // rejected or unreachable: revert to the displayed query for a retry
      this.error = describe(err);
      this.phase = "awaiting_choice";
      this.emit();
      return false;
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return `network failure: ${err.message}`;
  return String(err);
}
