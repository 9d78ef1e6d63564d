// Non-overlapping poll loop with backoff. The next tick is scheduled only
// after the previous request settles, so requests never pile up; failures
// double the delay up to a cap and recovery snaps back to the base
// interval.

export interface PollOptions {
  intervalMs: number;
  maxBackoffMs?: number;
  onError?: (error: unknown, nextDelayMs: number) => void;
  onRecover?: () => void;
}

export class PollLoop {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private running = false;
  private failures = 0;

  constructor(
    private readonly options: PollOptions,
    private readonly tick: () => Promise<void>,
  ) {}

  get consecutiveFailures(): number {
    return this.failures;
  }

  nextDelay(): number {
    const base = this.options.intervalMs;
    if (this.failures === 0) {
      return base;
    }
    const cap = this.options.maxBackoffMs ?? base * 32;
    return Math.min(base * 2 ** this.failures, cap);
  }

  start(): void {
    if (this.running) {
      return;
    }
    this.running = true;
    void this.runOnce();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  private async runOnce(): Promise<void> {
    if (!this.running) {
      return;
    }
    try {
      await this.tick();
      if (this.failures > 0) {
        this.failures = 0;
        this.options.onRecover?.();
      }
    } catch (error) {
      this.failures += 1;
      this.options.onError?.(error, this.nextDelay());
    }
    if (this.running) {
      this.timer = setTimeout(() => void this.runOnce(), this.nextDelay());
    }
  }
}
