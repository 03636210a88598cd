import { ApiClient } from './api.js';
import { OfflineQueue } from './queue.js';
import { AppStore } from './state.js';
import { render } from './ui.js';

declare global {
  interface Window {
    __CONFLICTKIT_API__?: string;
  }
}

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return (
    params.get('api')
    ?? window.__CONFLICTKIT_API__
    ?? window.localStorage.getItem('conflictkit.api')
    ?? ''
  );
}

function userId(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('user') ?? window.localStorage.getItem('conflictkit.user') ?? 'resident';
}

export async function boot(root: HTMLElement): Promise<AppStore> {
  const api = new ApiClient(apiBase());
  const store = new AppStore(userId(), api, new OfflineQueue(window.localStorage));
  await store.refresh();
  render(store, root);
  return store;
}

const rootElement = document.getElementById('app');
if (rootElement) {
  void boot(rootElement);
}
