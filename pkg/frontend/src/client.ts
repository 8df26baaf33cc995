import type {
  ArchiveStats,
  BatchProblem,
  BatchResponse,
  ClientConfig,
  ScoreResult,
  ScoresAck,
} from './types.js';

/** Input rejected locally before any request is made. */
export class ValidationError extends Error {}

/** The archive holds no problems yet (HTTP 503). */
export class EmptyArchiveError extends Error {}

/** Engine unreachable or persistently failing after all retries. */
export class ConnectionError extends Error {
  constructor(message: string, public readonly cause?: unknown) {
    super(message);
  }
}

const DEFAULT_TIMEOUT_MS = 10_000;
const DEFAULT_RETRIES = 3;

/**
 * Thin trainer-side client for the problem-sampling service.
 *
 * The client never computes learnability itself: it ships raw
 * (k, successes) pairs so the scoring formula lives in one place on the
 * server. Safe for use from a single training loop.
 */
export class TrainerClient {
  private readonly baseUrl: string;
  private readonly timeoutMs: number;
  private readonly retries: number;

  constructor(
    config: ClientConfig,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {
    const timeoutMs = config.timeoutMs ?? DEFAULT_TIMEOUT_MS;
    if (timeoutMs <= 0) {
      throw new ValidationError(`timeoutMs must be positive, got ${timeoutMs}`);
    }
    this.baseUrl = config.baseUrl.replace(/\/+$/, '');
    this.timeoutMs = timeoutMs;
    this.retries = Math.max(1, config.retries ?? DEFAULT_RETRIES);
  }

  /** Fetch exactly `n` training problems, preserving server ordering. */
  async fetchBatch(n: number, step: number): Promise<BatchResponse> {
    if (!Number.isInteger(n) || n <= 0) {
      throw new ValidationError(`batch size must be a positive integer, got ${n}`);
    }
    const url = `${this.baseUrl}/v1/batch?n=${n}&step=${step}`;
    const body = await this.request<BatchResponse>(url, { method: 'GET' });
    if (body.problems.length !== n) {
      throw new ConnectionError(
        `server returned ${body.problems.length} problems for n=${n}`,
      );
    }
    return body;
  }

  /** Report rollout verdicts; returns the server's applied/ignored counts. */
  async postScores(step: number, results: ScoreResult[]): Promise<ScoresAck> {
    for (const result of results) {
      if (result.k < 2) {
        throw new ValidationError(
          `result for ${result.id} has k=${result.k}; scoring needs k >= 2`,
        );
      }
      if (result.successes < 0 || result.successes > result.k) {
        throw new ValidationError(
          `result for ${result.id} has successes outside [0, k]`,
        );
      }
    }
    return this.request<ScoresAck>(`${this.baseUrl}/v1/scores`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ step, results }),
    });
  }

  /** Per-category occupancy, mean scores, and the depth histogram. */
  async archiveStats(): Promise<ArchiveStats> {
    return this.request<ArchiveStats>(`${this.baseUrl}/v1/archive/stats`, {
      method: 'GET',
    });
  }

  private async request<T>(url: string, init: RequestInit): Promise<T> {
    let lastError: unknown;
    for (let attempt = 1; attempt <= this.retries; attempt++) {
      if (attempt > 1) {
        await sleep(100 * 2 ** (attempt - 2));
      }
      let response: Response;
      try {
        const controller = new AbortController();
        const timer = setTimeout(() => controller.abort(), this.timeoutMs);
        try {
          response = await this.fetchImpl(url, { ...init, signal: controller.signal });
        } finally {
          clearTimeout(timer);
        }
      } catch (error) {
        lastError = error;
        continue;
      }
      if (response.status === 503) {
        throw new EmptyArchiveError('archive holds no problems yet');
      }
      if (response.status >= 500) {
        lastError = new Error(`HTTP ${response.status}`);
        continue;
      }
      if (!response.ok) {
        throw new ConnectionError(
          `HTTP ${response.status}: ${await safeText(response)}`,
        );
      }
      return (await response.json()) as T;
    }
    throw new ConnectionError(
      `request failed after ${this.retries} attempts: ${String(lastError)}`,
      lastError,
    );
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function safeText(response: Response): Promise<string> {
  try {
    return (await response.text()).slice(0, 200);
  } catch {
    return '<unreadable body>';
  }
}

export type { ArchiveStats, BatchProblem, BatchResponse, ClientConfig, ScoreResult, ScoresAck };
