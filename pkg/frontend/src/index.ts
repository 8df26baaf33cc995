export {
  ConnectionError,
  EmptyArchiveError,
  TrainerClient,
  ValidationError,
} from './client.js';
export type {
  ArchiveStats,
  BatchProblem,
  BatchResponse,
  CategoryStats,
  ClientConfig,
  ScoreResult,
  ScoresAck,
} from './types.js';
