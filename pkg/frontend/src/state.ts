import { ApiClient, ApiRequestError, NetworkError } from './api.js';
import { OfflineQueue } from './queue.js';
import type { PendingScenarios, Prediction, ScenarioView, StoredCase } from './types.js';

export type Tab = 'annotate' | 'rate';

/**
 * Application state: a snapshot of server state (scenarios, predictions)
 * plus local-only bits (current selections, the unsent queue, transient
 * errors). Rendering is a pure function of this object, so a refresh after
 * any action reconciles the UI with the server.
 */
export class AppStore {
  tab: Tab = 'annotate';
  scenarios: PendingScenarios = { user: '', total: 0, completed: 0, pending: [] };
  cases: StoredCase[] = [];
  predictions: Prediction[] = [];

  selectedOption: string | null = null;
  selectedEmergency: number | null = null;
  ratingChoices = new Map<string, number>();
  predictTarget: string | null = null;

  error: string | null = null;
  notice: string | null = null;
  loaded = false;

  constructor(
    public readonly user: string,
    private readonly api: ApiClient,
    public readonly queue: OfflineQueue,
  ) {}

  /** Scenarios still needing annotation, excluding ones queued offline. */
  get annotatable(): ScenarioView[] {
    const queued = this.queue.queuedScenarioIds();
    return this.scenarios.pending.filter((s) => !queued.has(s.scenario_id));
  }

  get currentScenario(): ScenarioView | null {
    return this.annotatable[0] ?? null;
  }

  get annotatedCount(): number {
    return this.scenarios.completed;
  }

  /** Scenarios a prediction can target: still-pending plus already-annotated. */
  get predictTargets(): Array<{ scenario_id: string; conflict_type: string }> {
    const seen = new Map<string, string>();
    for (const scenario of this.scenarios.pending) {
      seen.set(scenario.scenario_id, scenario.conflict_type);
    }
    for (const stored of this.cases) {
      seen.set(stored.scenario.scenario_id, stored.scenario.conflict_type);
    }
    return [...seen.entries()]
      .map(([scenario_id, conflict_type]) => ({ scenario_id, conflict_type }))
      .sort((a, b) => a.scenario_id.localeCompare(b.scenario_id));
  }

  get unsentCount(): number {
    return this.queue.length;
  }

  canSubmitCase(): boolean {
    return this.currentScenario !== null
      && this.selectedOption !== null
      && this.selectedEmergency !== null;
  }

  canSubmitRating(predictionId: string): boolean {
    return this.ratingChoices.has(predictionId);
  }

  async refresh(): Promise<void> {
    this.error = null;
    try {
      this.scenarios = await this.api.pendingScenarios(this.user);
      this.cases = (await this.api.listCases(this.user)).cases;
      this.predictions = (await this.api.listPredictions(this.user)).predictions;
      this.loaded = true;
    } catch (error) {
      this.handleFailure(error, 'loading state');
    }
  }

  selectOption(text: string): void {
    this.selectedOption = text;
  }

  selectEmergency(level: number): void {
    this.selectedEmergency = level;
  }

  selectRating(predictionId: string, rating: number): void {
    this.ratingChoices.set(predictionId, rating);
  }

  async submitCase(): Promise<void> {
    const scenario = this.currentScenario;
    if (!scenario || !this.canSubmitCase()) return;
    const submission = {
      user_id: this.user,
      scenario_id: scenario.scenario_id,
      option_text: this.selectedOption as string,
      emergency: this.selectedEmergency as number,
    };
    this.error = null;
    this.notice = null;
    try {
      await this.api.submitCase(submission);
      this.clearCaseSelection();
      await this.refresh();
    } catch (error) {
      if (error instanceof NetworkError) {
        this.queue.push({
          kind: 'case',
          key: `case:${scenario.scenario_id}`,
          submission,
        });
        this.clearCaseSelection();
        this.notice = 'offline: submission queued as unsent';
      } else {
        this.handleFailure(error, 'submitting the case');
      }
    }
  }

  async submitRating(predictionId: string): Promise<void> {
    const rating = this.ratingChoices.get(predictionId);
    if (rating === undefined) return;
    this.error = null;
    this.notice = null;
    try {
      await this.api.ratePrediction(predictionId, rating);
      this.ratingChoices.delete(predictionId);
      await this.refresh();
    } catch (error) {
      if (error instanceof NetworkError) {
        this.queue.push({
          kind: 'rating',
          key: `rating:${predictionId}`,
          prediction_id: predictionId,
          rating,
        });
        this.ratingChoices.delete(predictionId);
        this.notice = 'offline: rating queued as unsent';
      } else {
        this.handleFailure(error, 'submitting the rating');
      }
    }
  }

  async requestPrediction(): Promise<void> {
    if (!this.predictTarget) return;
    this.error = null;
    try {
      await this.api.predict(this.user, this.predictTarget);
      await this.refresh();
    } catch (error) {
      this.handleFailure(error, 'requesting a prediction');
    }
  }

  async retryUnsent(): Promise<void> {
    this.error = null;
    const { sent, remaining } = await this.queue.flush(this.api);
    this.notice = remaining > 0
      ? `retried: ${sent} sent, ${remaining} still unsent`
      : sent > 0 ? `retried: ${sent} sent` : null;
    await this.refresh();
  }

  private clearCaseSelection(): void {
    this.selectedOption = null;
    this.selectedEmergency = null;
  }

  private handleFailure(error: unknown, doing: string): void {
    if (error instanceof ApiRequestError) {
      this.error = `${error.body.message} (${error.body.code})`;
    } else if (error instanceof NetworkError) {
      this.error = `offline while ${doing}; will retry`;
    } else {
      this.error = `unexpected error while ${doing}: ${String(error)}`;
    }
  }
}
