/** Wire types for the problem-sampling service. */

export interface BatchProblem {
  id: string;
  question: string;
  gold_answer: string;
  setting: string;
  depth: number;
}

export interface BatchResponse {
  problems: BatchProblem[];
  global_step: number;
}

/** One training item's rollout outcome: k attempts, `successes` correct. */
export interface ScoreResult {
  id: string;
  k: number;
  successes: number;
}

export interface ScoresAck {
  applied: number;
  ignored: number;
  rejected: number;
}

export interface CategoryStats {
  count: number;
  mean_score: number;
}

export interface ArchiveStats {
  global_step: number;
  total: number;
  refresh_misses: number;
  per_category: Record<string, CategoryStats>;
  depth_histogram: Record<string, number>;
}

export interface ClientConfig {
  baseUrl: string;
  /** Per-request timeout in milliseconds. Must be positive. */
  timeoutMs?: number;
  /** Attempts per request (1 = no retry). */
  retries?: number;
}
