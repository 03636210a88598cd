import type {
  ApiErrorBody,
  CaseSubmission,
  PendingScenarios,
  Prediction,
  StoredCase,
} from './types.js';

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

/** Server answered with a non-2xx ApiError body. */
export class ApiRequestError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

/** The request never reached the server (offline, refused, timed out). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${cause instanceof Error ? cause.message : String(cause)}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  async pendingScenarios(user: string): Promise<PendingScenarios> {
    return this.request('GET', `/v1/annotation/scenarios?user=${encodeURIComponent(user)}`);
  }

  async submitCase(body: CaseSubmission): Promise<{ case_id: string; stored: boolean }> {
    return this.request('POST', '/v1/annotation/cases', body);
  }

  async listCases(user: string): Promise<{ user: string; cases: StoredCase[] }> {
    return this.request('GET', `/v1/annotation/cases?user=${encodeURIComponent(user)}`);
  }

  async predict(userId: string, scenarioId: string): Promise<Prediction> {
    return this.request('POST', '/v1/predict', { user_id: userId, scenario_id: scenarioId });
  }

  async listPredictions(user: string): Promise<{ user: string; predictions: Prediction[] }> {
    return this.request('GET', `/v1/predictions?user=${encodeURIComponent(user)}`);
  }

  async ratePrediction(predictionId: string, rating: number): Promise<Prediction> {
    return this.request(
      'POST',
      `/v1/predictions/${encodeURIComponent(predictionId)}/rating`,
      { rating },
    );
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        parsed = { code: 'internal', message: `HTTP ${response.status}`, detail: null };
      }
      throw new ApiRequestError(response.status, parsed);
    }
    return (await response.json()) as T;
  }
}
