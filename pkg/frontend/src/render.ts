/** Pure HTML/SVG rendering of API payloads.
 *
 * Every number shown comes verbatim from the payload (formatting only, no
 * recomputation), which keeps the dashboard display-only and lets the
 * contract tests compare rendered values against the payload directly.
 */

import type { AnalysisReport, BindingSet, Match, MitigationResult, Story } from './types.js';
import { PIE_PALETTE, TOP_MATCH_COLOR, bandColor, ratingColor } from './theme.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function formatPercent(similarity: number): string {
  return (similarity * 100).toFixed(2) + '%';
}

export function renderMatchTable(report: AnalysisReport): string {
  const rows = report.matches
    .map((match, index) => renderMatchRow(match, index === 0))
    .join('\n');
  return `<table class="match-table">
<thead><tr><th>Similarity</th><th>CVE</th><th>CWE</th><th>Description</th><th>CVSS v3.1</th></tr></thead>
<tbody>
${rows}
</tbody>
</table>`;
}

function renderMatchRow(match: Match, top: boolean): string {
  const classes = top ? 'match-row top-match' : 'match-row';
  const style = top ? ` style="outline: 2px solid ${TOP_MATCH_COLOR}"` : '';
  const badge = `<span class="band-badge" style="background:${bandColor(match.relevance_band)}">${match.relevance_band}</span>`;
  return `<tr class="${classes}" data-cve="${escapeHtml(match.cve_id)}"${style}>` +
    `<td>${formatPercent(match.similarity)} ${badge}</td>` +
    `<td>${escapeHtml(match.cve_id)}</td>` +
    `<td>${escapeHtml(match.cwe_ids.join(', ') || '-')}</td>` +
    `<td>${escapeHtml(match.description)}</td>` +
    `<td>${escapeHtml(match.cvss_vector ?? '-')}</td>` +
    `</tr>`;
}

export function renderSimilarityBars(report: AnalysisReport): string {
  const bars = report.matches
    .map((match) => {
      const width = (match.similarity * 100).toFixed(2);
      return `<div class="bar-row" data-cve="${escapeHtml(match.cve_id)}">` +
        `<span class="bar-label">${escapeHtml(match.cve_id)}</span>` +
        `<div class="bar" data-value="${match.similarity}" ` +
        `style="width:${width}%;background:${bandColor(match.relevance_band)}"></div>` +
        `<span class="bar-value">${formatPercent(match.similarity)}</span>` +
        `</div>`;
    })
    .join('\n');
  return `<div class="similarity-bars">\n${bars}\n</div>`;
}

/** Pie slices sorted by count descending (ties by id); the modal CWE slice
 * is emphasized with a stroke and a css class. */
export function renderCwePie(report: AnalysisReport): string {
  const entries = Object.entries(report.cwe_distribution).sort(
    (a, b) => b[1] - a[1] || a[0].localeCompare(b[0]),
  );
  const total = entries.reduce((acc, [, count]) => acc + count, 0);
  if (total === 0) {
    return '<div class="cwe-pie empty">no CWE links among matches</div>';
  }
  const cx = 100;
  const cy = 100;
  const r = 80;
  let angle = -Math.PI / 2;
  const slices: string[] = [];
  entries.forEach(([cweId, count], index) => {
    const fraction = count / total;
    const color = PIE_PALETTE[index % PIE_PALETTE.length];
    const modal = cweId === report.modal_cwe;
    const cls = modal ? 'pie-slice modal-slice' : 'pie-slice';
    const emphasis = modal ? ' stroke="#212121" stroke-width="3"' : '';
    if (entries.length === 1) {
      slices.push(
        `<circle class="${cls}" data-cwe="${escapeHtml(cweId)}" data-count="${count}" ` +
          `cx="${cx}" cy="${cy}" r="${r}" fill="${color}"${emphasis}></circle>`,
      );
      return;
    }
    const next = angle + fraction * 2 * Math.PI;
    const x1 = cx + r * Math.cos(angle);
    const y1 = cy + r * Math.sin(angle);
    const x2 = cx + r * Math.cos(next);
    const y2 = cy + r * Math.sin(next);
    const large = fraction > 0.5 ? 1 : 0;
    slices.push(
      `<path class="${cls}" data-cwe="${escapeHtml(cweId)}" data-count="${count}" ` +
        `d="M ${cx} ${cy} L ${x1.toFixed(3)} ${y1.toFixed(3)} ` +
        `A ${r} ${r} 0 ${large} 1 ${x2.toFixed(3)} ${y2.toFixed(3)} Z" fill="${color}"${emphasis}></path>`,
    );
    angle = next;
  });
  const legend = entries
    .map(([cweId, count], index) => {
      const modal = cweId === report.modal_cwe;
      const mark = modal ? ' <strong>(largest slice)</strong>' : '';
      return `<li class="${modal ? 'legend-modal' : ''}" data-cwe="${escapeHtml(cweId)}">` +
        `<span class="swatch" style="background:${PIE_PALETTE[index % PIE_PALETTE.length]}"></span>` +
        `${escapeHtml(cweId)}: ${count}${mark}</li>`;
    })
    .join('\n');
  return `<div class="cwe-pie">
<svg viewBox="0 0 200 200" width="200" height="200">${slices.join('')}</svg>
<ul class="pie-legend">
${legend}
</ul>
</div>`;
}

/** Horizontal exploitability-vs-impact bars plus the predicted vector. */
export function renderSeverityPanel(report: AnalysisReport): string {
  if (!report.scores || !report.predicted_vector) {
    return '<div class="severity-panel empty">no CVSS evidence among the matches</div>';
  }
  const scores = report.scores;
  const bar = (label: string, value: number) => {
    const width = (value * 10).toFixed(1); // sub-scores live on a 0..10 axis
    return `<div class="score-row"><span class="score-label">${label}</span>` +
      `<div class="score-bar" data-score="${label.toLowerCase()}" data-value="${value}" ` +
      `style="width:${width}%;background:${ratingColor(scores.rating)}"></div>` +
      `<span class="score-value">${value}</span></div>`;
  };
  return `<div class="severity-panel">
${bar('Exploitability', scores.exploitability)}
${bar('Impact', scores.impact)}
<p class="base-score">Base score <strong data-base="${scores.base}">${scores.base}</strong>
 <span class="rating" style="color:${ratingColor(scores.rating)}">${escapeHtml(scores.rating)}</span></p>
<p class="predicted-vector"><code>${escapeHtml(report.predicted_vector)}</code></p>
</div>`;
}

export function renderMitigationPanel(result: MitigationResult): string {
  const banner = result.fixture_mode
    ? '<div class="fixture-banner">fixture mode: canned completion, no live model</div>\n'
    : '';
  const warnings = result.warnings.length
    ? `<ul class="warnings">${result.warnings.map((w) => `<li>${escapeHtml(w)}</li>`).join('')}</ul>\n`
    : '';
  const sources = result.source_urls
    .map((url) => `<div class="source-line">Source: <a href="${escapeHtml(url)}">${escapeHtml(url)}</a></div>`)
    .join('\n');
  return `<div class="mitigation-panel">
${banner}<pre class="mitigation-text">${escapeHtml(result.response)}</pre>
${warnings}${sources}
</div>`;
}

export function renderBindingsTable(bindings: BindingSet): string {
  const head = bindings.variables.map((v) => `<th>${escapeHtml(v)}</th>`).join('');
  const rows = bindings.rows
    .map(
      (row) =>
        `<tr>${bindings.variables.map((v) => `<td>${escapeHtml(row[v] ?? '')}</td>`).join('')}</tr>`,
    )
    .join('\n');
  return `<table class="bindings-table">
<thead><tr>${head}</tr></thead>
<tbody>
${rows}
</tbody>
</table>
<p class="row-count">${bindings.rows.length} rows</p>`;
}

/** Simple node-edge diagram: vulnerability -> target -> impact columns with
 * CWE side links listed under each path. */
export function renderStory(story: Story): string {
  if (story.paths.length === 0) {
    return `<div class="story empty">no paths touch ${escapeHtml(story.start)}</div>`;
  }
  const rowHeight = 64;
  const width = 760;
  const height = story.paths.length * rowHeight + 20;
  const nodes: string[] = [];
  const columns = [40, 320, 600];
  story.paths.forEach((path, i) => {
    const y = 40 + i * rowHeight;
    const labels = [path.vulnerability, path.exploit_target, path.attack_impact];
    labels.forEach((label, c) => {
      nodes.push(
        `<g class="story-node" data-name="${escapeHtml(label)}">` +
          `<rect x="${columns[c] - 10}" y="${y - 18}" rx="6" width="180" height="30" ` +
          `fill="#eceff1" stroke="#607d8b"></rect>` +
          `<text x="${columns[c]}" y="${y + 2}" font-size="12">${escapeHtml(label)}</text></g>`,
      );
    });
    nodes.push(
      `<line x1="${columns[0] + 170}" y1="${y - 3}" x2="${columns[1] - 10}" y2="${y - 3}" stroke="#607d8b" marker-end="url(#arrow)"></line>`,
      `<line x1="${columns[1] + 170}" y1="${y - 3}" x2="${columns[2] - 10}" y2="${y - 3}" stroke="#607d8b" marker-end="url(#arrow)"></line>`,
    );
    if (path.cwes.length) {
      nodes.push(
        `<text class="story-cwes" x="${columns[0]}" y="${y + 24}" font-size="11" fill="#616161">targets ${escapeHtml(path.cwes.join(', '))}</text>`,
      );
    }
  });
  return `<svg class="story" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">
<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="#607d8b"></path></marker></defs>
${nodes.join('\n')}
</svg>`;
}
