/** Wire types, mirroring the session service's JSON payloads. */

export type FeedbackKind = "confirm" | "reject" | "retain" | "replace";

export interface SessionConfigView {
  strategy: string;
  budget: number | null;
  batch_size: number;
  seed: number;
  threshold: number;
  k_reveal: number;
}

export interface Metrics {
  initial_loss: number;
  loss: number;
  improvement: number;
  violations: number;
  dirty_tuples: number;
  pending: number;
  user_labels: number;
  events: number;
}

export interface SessionSnapshot {
  version: number;
  config: SessionConfigView;
  attributes: string[];
  tuples: number;
  initial: {
    dirty_tuples: number;
    violations: number;
    pending: number;
  };
  trained_attributes: string[];
  selected_group: string | null;
  metrics: Metrics;
}

export interface GroupView {
  id: string;
  rank: number;
  attribute: string;
  value: string;
  size: number;
  gain: number;
  budget: number;
  selected: boolean;
}

export interface PredictionView {
  label: FeedbackKind | string;
  confirm_prob: number;
  uncertainty: number;
}

export interface TupleView {
  id: string;
  weight: number;
  cells: Record<string, string>;
}

export interface UpdateRow {
  update_id: string;
  tuple_id: string;
  attribute: string;
  current_value: string;
  suggested_value: string;
  score: number;
  scenario: number;
  rules: string[];
  tuple: TupleView;
  prediction: PredictionView | null;
}

export interface FeedbackEvent {
  index: number;
  kind: string;
  source: string;
  tuple_id: string;
  attribute: string;
  suggested_value: string;
  new_value: string | null;
  old_value: string | null;
  update_id: string;
  wire_id: string;
  feedback_count: number;
  improvement: number;
  loss: number;
  writes: [string, string, string, string, boolean][];
  discarded: string[];
  created: string[];
}

export interface FeedbackResponse {
  event: FeedbackEvent;
  discarded: string[];
  created: string[];
  metrics: Metrics;
}

export interface DelegateResponse {
  decided: number;
  metrics: Metrics;
}

export interface EventsResponse {
  cursor: number;
  events: FeedbackEvent[];
}
