// Wire types mirroring the service API. Option texts are never hardcoded in
// the UI; they always arrive through ScenarioView.options.

export type ConflictType =
  | 'goal_absence'
  | 'human_interaction'
  | 'human_occupancy'
  | 'object_state';

export interface ScenarioView {
  scenario_id: string;
  image: string;
  task: string;
  step: string;
  speech?: string;
  conflict_type: ConflictType;
  options: string[];
}

export interface PendingScenarios {
  user: string;
  total: number;
  completed: number;
  pending: ScenarioView[];
}

export interface CaseSubmission {
  user_id: string;
  scenario_id: string;
  option_text: string;
  emergency: number;
  case_id?: string;
}

export interface StoredCase {
  case_id: string;
  user_id: string;
  scenario: Omit<ScenarioView, 'options'>;
  chosen_option: string;
  emergency: number;
  created_at: string;
}

export interface Prediction {
  prediction_id: string;
  user_id: string;
  scenario: Omit<ScenarioView, 'options'>;
  used_case_ids: string[];
  preference_summary: string;
  predicted_option: string;
  created_at: string;
  rating: number | null;
  rated_at: string | null;
}

export interface ApiErrorBody {
  code: 'validation' | 'not_found' | 'backend_unavailable' | 'internal';
  message: string;
  detail: string | null;
}

export const EMERGENCY_LEVELS: ReadonlyArray<{ value: number; label: string }> = [
  { value: 1, label: 'low concern' },
  { value: 2, label: 'medium concern' },
  { value: 3, label: 'high concern' },
];

export const RATING_VALUES = [1, 2, 3, 4, 5] as const;
