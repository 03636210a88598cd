import { AppStore } from './state.js';
import { EMERGENCY_LEVELS, RATING_VALUES } from './types.js';
import type { Prediction, ScenarioView } from './types.js';

// Full re-render on every action keeps the DOM an exact function of the
// store; at 20 scenarios and a handful of predictions that is plenty fast.

export function render(store: AppStore, root: HTMLElement): void {
  root.textContent = '';
  root.appendChild(header(store, root));
  const main = el('main', 'content');
  if (store.error) {
    const banner = el('div', 'error-banner', store.error);
    banner.setAttribute('data-testid', 'error-banner');
    main.appendChild(banner);
  }
  if (store.notice) {
    const note = el('div', 'notice-banner', store.notice);
    note.setAttribute('data-testid', 'notice-banner');
    main.appendChild(note);
  }
  main.appendChild(store.tab === 'annotate' ? annotatePanel(store, root) : ratePanel(store, root));
  root.appendChild(main);
}

function rerender(store: AppStore, root: HTMLElement): void {
  render(store, root);
}

function header(store: AppStore, root: HTMLElement): HTMLElement {
  const bar = el('header', 'topbar');
  bar.appendChild(el('h1', 'title', 'Conflict preferences'));
  bar.appendChild(el('span', 'user-chip', `user: ${store.user}`));

  const unsent = el('span', 'unsent-badge', `${store.unsentCount} unsent`);
  unsent.setAttribute('data-testid', 'unsent-badge');
  if (store.unsentCount === 0) unsent.classList.add('hidden');
  bar.appendChild(unsent);

  const retry = button('retry unsent', async () => {
    await store.retryUnsent();
    rerender(store, root);
  });
  retry.setAttribute('data-testid', 'retry-unsent');
  if (store.unsentCount === 0) retry.classList.add('hidden');
  bar.appendChild(retry);

  for (const tab of ['annotate', 'rate'] as const) {
    const tabButton = button(tab, () => {
      store.tab = tab;
      rerender(store, root);
    });
    tabButton.setAttribute('data-testid', `tab-${tab}`);
    if (store.tab === tab) tabButton.classList.add('active');
    bar.appendChild(tabButton);
  }
  return bar;
}

// -- annotation flow (collects preferred option + emergency level) -------------

function annotatePanel(store: AppStore, root: HTMLElement): HTMLElement {
  const panel = el('section', 'panel');
  const progress = el(
    'div', 'progress',
    `${store.annotatedCount}/${store.scenarios.total} annotated`,
  );
  progress.setAttribute('data-testid', 'annotate-progress');
  panel.appendChild(progress);

  const scenario = store.currentScenario;
  if (!scenario) {
    const done = el('p', 'all-done',
      store.unsentCount > 0
        ? 'No scenarios left to annotate; some submissions are still unsent.'
        : 'All scenarios annotated.');
    done.setAttribute('data-testid', 'annotate-done');
    panel.appendChild(done);
    return panel;
  }

  panel.appendChild(scenarioCard(scenario));

  const optionsBox = el('div', 'options');
  optionsBox.setAttribute('data-testid', 'option-buttons');
  for (const text of scenario.options) {
    const optionButton = button(text, () => {
      store.selectOption(text);
      rerender(store, root);
    });
    optionButton.classList.add('option');
    if (store.selectedOption === text) optionButton.classList.add('selected');
    optionsBox.appendChild(optionButton);
  }
  panel.appendChild(optionsBox);

  const emergencyBox = el('fieldset', 'emergency');
  emergencyBox.appendChild(el('legend', '', 'emergency level'));
  for (const { value, label } of EMERGENCY_LEVELS) {
    const wrap = el('label', 'emergency-choice');
    const radio = document.createElement('input');
    radio.type = 'radio';
    radio.name = 'emergency';
    radio.value = String(value);
    radio.checked = store.selectedEmergency === value;
    radio.setAttribute('data-testid', `emergency-${value}`);
    radio.addEventListener('change', () => {
      store.selectEmergency(value);
      rerender(store, root);
    });
    wrap.appendChild(radio);
    wrap.appendChild(el('span', '', label));
    emergencyBox.appendChild(wrap);
  }
  panel.appendChild(emergencyBox);

  const submit = button('submit preference', async () => {
    await store.submitCase();
    rerender(store, root);
  });
  submit.setAttribute('data-testid', 'submit-case');
  submit.disabled = !store.canSubmitCase();
  panel.appendChild(submit);
  return panel;
}

function scenarioCard(scenario: ScenarioView): HTMLElement {
  const card = el('div', 'scenario-card');
  card.setAttribute('data-testid', 'scenario-card');
  card.setAttribute('data-scenario-id', scenario.scenario_id);
  const badge = el('span', 'type-badge', scenario.conflict_type.replace('_', ' '));
  badge.setAttribute('data-testid', 'conflict-badge');
  card.appendChild(badge);
  card.appendChild(el('div', 'observation', `observation: ${scenario.image}`));
  card.appendChild(el('div', 'task', `task: ${scenario.task}`));
  card.appendChild(el('div', 'step', `step: ${scenario.step}`));
  if (scenario.speech) {
    card.appendChild(el('div', 'speech', `speech: ${scenario.speech}`));
  }
  return card;
}

// -- rating flow (shows predictions + collects 1-5 ratings) ---------------------

function ratePanel(store: AppStore, root: HTMLElement): HTMLElement {
  const panel = el('section', 'panel');

  const requester = el('div', 'predict-request');
  const select = document.createElement('select');
  select.setAttribute('data-testid', 'predict-scenario');
  const placeholder = document.createElement('option');
  placeholder.value = '';
  placeholder.textContent = 'choose a scenario…';
  select.appendChild(placeholder);
  for (const target of store.predictTargets) {
    const option = document.createElement('option');
    option.value = target.scenario_id;
    option.textContent = `${target.scenario_id} (${target.conflict_type})`;
    select.appendChild(option);
  }
  select.value = store.predictTarget ?? '';
  select.addEventListener('change', () => {
    store.predictTarget = select.value || null;
  });
  requester.appendChild(select);
  const predictButton = button('predict preferred option', async () => {
    await store.requestPrediction();
    rerender(store, root);
  });
  predictButton.setAttribute('data-testid', 'request-prediction');
  requester.appendChild(predictButton);
  panel.appendChild(requester);

  const list = el('div', 'predictions');
  list.setAttribute('data-testid', 'prediction-list');
  if (store.predictions.length === 0) {
    list.appendChild(el('p', 'empty', 'No predictions yet.'));
  }
  for (const prediction of store.predictions) {
    list.appendChild(predictionCard(store, root, prediction));
  }
  panel.appendChild(list);
  return panel;
}

function predictionCard(store: AppStore, root: HTMLElement,
                        prediction: Prediction): HTMLElement {
  const card = el('div', 'prediction-card');
  card.setAttribute('data-testid', 'prediction-card');
  card.setAttribute('data-prediction-id', prediction.prediction_id);

  card.appendChild(el('div', 'task', `task: ${prediction.scenario.task}`));
  card.appendChild(el('div', 'step', `step: ${prediction.scenario.step}`));
  const summary = el('p', 'summary', prediction.preference_summary);
  summary.setAttribute('data-testid', 'preference-summary');
  card.appendChild(summary);

  const predicted = el('div', 'predicted-option', prediction.predicted_option);
  predicted.setAttribute('data-testid', 'predicted-option');
  predicted.classList.add('highlight');
  card.appendChild(predicted);

  const queuedRating = store.queue.queuedRatings().get(prediction.prediction_id);
  const status = el(
    'div', 'rating-status',
    prediction.rating !== null
      ? `rated: ${prediction.rating}`
      : queuedRating !== undefined
        ? `rating ${queuedRating} unsent`
        : 'not rated yet',
  );
  status.setAttribute('data-testid', 'rating-status');
  card.appendChild(status);

  const ratingBox = el('div', 'rating-buttons');
  for (const value of RATING_VALUES) {
    const ratingButton = button(String(value), () => {
      store.selectRating(prediction.prediction_id, value);
      rerender(store, root);
    });
    ratingButton.setAttribute('data-testid', `rating-${value}`);
    if (store.ratingChoices.get(prediction.prediction_id) === value) {
      ratingButton.classList.add('selected');
    }
    ratingBox.appendChild(ratingButton);
  }
  card.appendChild(ratingBox);

  const submit = button('submit rating', async () => {
    await store.submitRating(prediction.prediction_id);
    rerender(store, root);
  });
  submit.setAttribute('data-testid', 'submit-rating');
  submit.disabled = !store.canSubmitRating(prediction.prediction_id);
  card.appendChild(submit);
  return card;
}

// -- tiny DOM helpers -------------------------------------------------------------

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void | Promise<void>): HTMLButtonElement {
  const node = document.createElement('button');
  node.type = 'button';
  node.textContent = label;
  node.addEventListener('click', () => {
    void onClick();
  });
  return node;
}
