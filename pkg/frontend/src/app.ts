/** Browser entry point: wires the form, controller, and renderer together. */

import { ApiClient } from './api.js';
import { renderApp } from './render.js';
import { Controller } from './state.js';

function apiBase(): string {
  const meta = document.querySelector('meta[name="api-base"]');
  return meta?.getAttribute('content') ?? '';
}

function main(): void {
  const root = document.getElementById('results');
  const form = document.getElementById('question-form') as HTMLFormElement | null;
  const input = document.getElementById('question-input') as HTMLInputElement | null;
  if (!root || !form || !input) {
    throw new Error('missing #results, #question-form, or #question-input');
  }

  const controller = new Controller(new ApiClient(apiBase()), (state) => {
    root.innerHTML = renderApp(state);
  });

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void controller.submitQuestion(input.value);
  });

  // Drill-down and panel-close clicks arrive via delegation since the
  // result markup is re-rendered wholesale on every state change.
  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    const drill = target.closest<HTMLElement>('button.drill');
    if (drill?.dataset.articleId) {
      void controller.openArticle(Number(drill.dataset.articleId));
      return;
    }
    if (target.closest('button.close-panel')) {
      controller.closeArticle();
    }
  });
}

main();
