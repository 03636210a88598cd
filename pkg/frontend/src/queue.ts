import { ApiClient, NetworkError } from './api.js';
import type { CaseSubmission } from './types.js';

export type QueueItem =
  | { kind: 'case'; key: string; submission: CaseSubmission }
  | { kind: 'rating'; key: string; prediction_id: string; rating: number };

const STORAGE_KEY = 'conflictkit.unsent';

/**
 * Unsent submissions survive reloads in localStorage. Items leave the queue
 * only when the server accepts them; a flush that fails midway keeps the
 * remainder queued.
 */
export class OfflineQueue {
  constructor(private readonly storage: Storage) {}

  items(): QueueItem[] {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as QueueItem[];
    } catch {
      return [];
    }
  }

  get length(): number {
    return this.items().length;
  }

  push(item: QueueItem): void {
    const items = this.items().filter((existing) => existing.key !== item.key);
    items.push(item);
    this.save(items);
  }

  queuedScenarioIds(): Set<string> {
    const ids = new Set<string>();
    for (const item of this.items()) {
      if (item.kind === 'case') ids.add(item.submission.scenario_id);
    }
    return ids;
  }

  queuedRatings(): Map<string, number> {
    const ratings = new Map<string, number>();
    for (const item of this.items()) {
      if (item.kind === 'rating') ratings.set(item.prediction_id, item.rating);
    }
    return ratings;
  }

  /** Replay queued items against the server; returns how many were accepted. */
  async flush(api: ApiClient): Promise<{ sent: number; remaining: number }> {
    let sent = 0;
    const remaining: QueueItem[] = [];
    for (const item of this.items()) {
      try {
        if (item.kind === 'case') {
          await api.submitCase(item.submission);
        } else {
          await api.ratePrediction(item.prediction_id, item.rating);
        }
        sent += 1;
      } catch (error) {
        if (error instanceof NetworkError) {
          remaining.push(item);
        }
        // Server-side rejections (4xx) drop the item: retrying an invalid
        // submission forever would wedge the queue.
      }
    }
    this.save(remaining);
    return { sent, remaining: remaining.length };
  }

  private save(items: QueueItem[]): void {
    if (items.length === 0) {
      this.storage.removeItem(STORAGE_KEY);
    } else {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(items));
    }
  }
}
