// Debounced latest-wins dispatch: at most one request in flight, stale
// responses dropped on the floor. Timer injection keeps tests clock-free.

export interface Timer {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const realTimer: Timer = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export class RequestScheduler<T> {
  private delayMs: number;
  private timer: Timer;
  private pending: unknown = null;
  private nextSeq = 0;
  private appliedSeq = 0;
  inFlight = 0;

  constructor(delayMs = 150, timer: Timer = realTimer) {
    this.delayMs = delayMs;
    this.timer = timer;
  }

  /** Schedule `start` after the debounce window; replaces any waiting call. */
  schedule(start: () => Promise<T>, apply: (value: T) => void, reject?: (err: unknown) => void): void {
    if (this.pending !== null) this.timer.clear(this.pending);
    this.pending = this.timer.set(() => {
      this.pending = null;
      this.dispatch(start, apply, reject);
    }, this.delayMs);
  }

  /** Fire immediately (retry buttons); still latest-wins. */
  dispatch(start: () => Promise<T>, apply: (value: T) => void, reject?: (err: unknown) => void): void {
    const seq = ++this.nextSeq;
    this.inFlight += 1;
    start().then(
      (value) => {
        this.inFlight -= 1;
        if (seq > this.appliedSeq) {
          this.appliedSeq = seq;
          apply(value);
        }
      },
      (err) => {
        this.inFlight -= 1;
        if (seq > this.appliedSeq && reject) {
          this.appliedSeq = seq;
          reject(err);
        }
      },
    );
  }

  cancel(): void {
    if (this.pending !== null) {
      this.timer.clear(this.pending);
      this.pending = null;
    }
    this.appliedSeq = this.nextSeq; // anything already in flight is stale now
  }
}
