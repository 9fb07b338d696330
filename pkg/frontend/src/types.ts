// Shapes of the chat service API (see docs/api.md in the repository root).

export interface Envelope<T> {
  request_id: string;
  payload: T | null;
  error: { code: string; message: string } | null;
}

export interface NluResult {
  intent: string;
  entities: { kind: string; value: string; span: [number, number] }[];
  sentiment: number;
  tokens: string[];
}

export interface ElicitationTask {
  task_id: string;
  goal: Record<string, unknown>;
  opened_at_turn: number;
  completed_at_turn: number | null;
  status: string;
}

export interface ActionPlan {
  kind: string;
  rendered_text: string;
  question_id: string | null;
  bindings: Record<string, string>;
  task: ElicitationTask | null;
  rule_id: string | null;
}

export interface Turn {
  index: number;
  initiator: "user" | "bot";
  text: string;
  timestamp: string;
  nlu: NluResult | null;
  action: ActionPlan | null;
  response_latency_ms: number | null;
}

export interface Feature {
  label: string;
  salience: number;
  source: string;
}

export interface TagRecord {
  slot: string;
  value: string;
  confirmed_by_user: boolean;
  source_turn: number | null;
}

export interface MementoPayload {
  memento_id: string;
  owner: string;
  media_kind: string;
  uri_or_path: string;
  visibility: string;
  features: Feature[];
  tags: TagRecord[];
  created_at: string;
  unfilled_slots: string[];
}

export interface MetricReport {
  session_id: string;
  turns_total: number;
  user_turns: number;
  duration_minutes: number;
  cumulative_avg_sentiment: number;
  engagement_rating: number | null;
  tasks_initiated: number;
  tasks_completed: number;
  completion_rate: number;
  tasks_none_initiated: boolean;
  mean_completion_turns: number;
  consistency: number;
  memory_violations: number;
  mean_response_ms: number;
  greeting_used: boolean;
  proactivity: number;
}

export interface Suggestion {
  person_id: string;
  display_name: string;
  score: number;
  shared: [string, string, string][];
}

export interface CreateSessionPayload {
  session_id: string;
  turns: Turn[];
}

export interface MessagePayload {
  session_id: string;
  turns: Turn[];
  active_memento: MementoPayload | null;
  metrics: MetricReport;
}

export interface RegisterMementoPayload {
  memento: MementoPayload;
  adapter_unavailable: boolean;
}
