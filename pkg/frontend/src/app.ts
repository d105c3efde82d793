/** Dashboard wiring: tabs, the analyze form, on-demand mitigation and the
 * ontology explorer. One analyze request is in flight at a time; mitigation
 * requests queue behind the active analysis. */

import { analyze, mitigate, ontologyQuery, ServiceError } from './api.js';
import {
  renderBindingsTable,
  renderCwePie,
  renderMatchTable,
  renderMitigationPanel,
  renderSeverityPanel,
  renderSimilarityBars,
  renderStory,
} from './render.js';
import type { AnalysisReport } from './types.js';

interface ViewModel {
  report: AnalysisReport | null;
  selectedCwes: string[];
  analyzing: boolean;
  mitigating: boolean;
  error: string | null;
}

const state: ViewModel = {
  report: null,
  selectedCwes: [],
  analyzing: false,
  mitigating: false,
  error: null,
};

const apiBase = '';
let pending: Promise<unknown> = Promise.resolve();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function showError(message: string | null): void {
  state.error = message;
  const banner = el<HTMLDivElement>('error-banner');
  banner.textContent = message ?? '';
  banner.style.display = message ? 'block' : 'none';
}

function renderReport(report: AnalysisReport): void {
  state.report = report;
  state.selectedCwes = Object.keys(report.cwe_distribution).sort();
  el('matches').innerHTML = renderMatchTable(report) + renderSimilarityBars(report);
  el('distribution').innerHTML = renderCwePie(report);
  el('severity').innerHTML = renderSeverityPanel(report);
  el('story').innerHTML = report.story
    ? renderStory(report.story)
    : '<div class="story empty">no ontology paths for these matches</div>';
  const picker = el<HTMLDivElement>('cwe-picker');
  picker.innerHTML = state.selectedCwes
    .map(
      (cwe) =>
        `<label><input type="checkbox" value="${cwe}" ${cwe === report.modal_cwe ? 'checked' : ''}> ${cwe}</label>`,
    )
    .join(' ');
  el<HTMLButtonElement>('mitigate-btn').disabled = false;
  el('results').style.display = 'block';
}

function runAnalyze(): void {
  const input = el<HTMLInputElement>('description');
  const description = input.value.trim();
  if (!description || state.analyzing) return;
  state.analyzing = true;
  el<HTMLButtonElement>('analyze-btn').disabled = true;
  showError(null);
  pending = pending
    .then(() => analyze(apiBase, description))
    .then((report) => renderReport(report))
    .catch((error) => {
      if (error instanceof ServiceError && error.status === 422) {
        showError(`invalid description: ${error.message}`);
      } else {
        showError(`analysis failed: ${error.message ?? error}`);
      }
    })
    .finally(() => {
      state.analyzing = false;
      refreshSubmitState();
    });
}

function runMitigate(): void {
  const report = state.report;
  if (!report || state.mitigating) return;
  const picked = Array.from(
    document.querySelectorAll<HTMLInputElement>('#cwe-picker input:checked'),
  ).map((box) => box.value);
  if (picked.length === 0) {
    showError('select at least one CWE for mitigation lookup');
    return;
  }
  state.mitigating = true;
  el('mitigation').innerHTML = '<div class="loading">requesting mitigation...</div>';
  pending = pending
    .then(() => mitigate(apiBase, report.query, picked))
    .then((result) => {
      el('mitigation').innerHTML = renderMitigationPanel(result);
    })
    .catch((error) => {
      const prompt =
        error instanceof ServiceError && (error.payload.detail as { prompt?: string })?.prompt;
      el('mitigation').innerHTML =
        `<div class="error">mitigation failed: ${error.message ?? error}` +
        ` <button id="mitigate-retry">retry</button></div>` +
        (prompt ? `<details><summary>prompt (for retry/copy)</summary><pre>${prompt}</pre></details>` : '');
      document.getElementById('mitigate-retry')?.addEventListener('click', runMitigate);
    })
    .finally(() => {
      state.mitigating = false;
    });
}

function runQuery(): void {
  const text = el<HTMLTextAreaElement>('query-text').value;
  ontologyQuery(apiBase, text)
    .then((bindings) => {
      el('query-result').innerHTML = renderBindingsTable(bindings);
    })
    .catch((error) => {
      const column =
        error instanceof ServiceError && (error.payload.detail as { column?: number })?.column;
      const caret = column ? '\n' + ' '.repeat(Math.max(column - 1, 0)) + '^' : '';
      el('query-result').innerHTML = `<pre class="error">${error.message}${caret}</pre>`;
    });
}

function refreshSubmitState(): void {
  const input = el<HTMLInputElement>('description');
  el<HTMLButtonElement>('analyze-btn').disabled =
    state.analyzing || input.value.trim().length === 0;
}

function switchTab(name: string): void {
  document.querySelectorAll<HTMLElement>('.tab-panel').forEach((panel) => {
    panel.style.display = panel.id === `tab-${name}` ? 'block' : 'none';
  });
  document.querySelectorAll<HTMLElement>('.tab-button').forEach((button) => {
    button.classList.toggle('active', button.dataset.tab === name);
  });
}

export function start(): void {
  el<HTMLInputElement>('description').addEventListener('input', refreshSubmitState);
  el<HTMLFormElement>('analyze-form').addEventListener('submit', (event) => {
    event.preventDefault();
    runAnalyze();
  });
  el<HTMLButtonElement>('mitigate-btn').addEventListener('click', runMitigate);
  el<HTMLButtonElement>('query-btn').addEventListener('click', runQuery);
  el<HTMLButtonElement>('query-canned').addEventListener('click', () => {
    el<HTMLTextAreaElement>('query-text').value =
      'SELECT ?v ?t ?i WHERE { ?v TargetsCWE CWE-276 . ?v Exploits ?t . ?t hasAttackImpact ?i }';
    runQuery();
  });
  document.querySelectorAll<HTMLElement>('.tab-button').forEach((button) => {
    button.addEventListener('click', () => switchTab(button.dataset.tab ?? 'matches'));
  });
  refreshSubmitState();
  switchTab('matches');
}

if (typeof document !== 'undefined' && document.getElementById('analyze-form')) {
  start();
}
