/** End-to-end smoke against a fixture-mode service instance: the dashboard's
 * analyze -> mitigate flow completes without any live network dependency
 * (pages and completions come from committed snapshots). */

import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, resolve } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import type { AnalysisReport, MitigationResult } from '../src/types.js';

const ROOT = resolve(__dirname, '..', '..');
const FIXTURES = join(ROOT, 'tests', 'fixtures');
const PORT = 8680 + (process.pid % 200);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

async function waitForHealth(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error('service did not become healthy');
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), 'hwv2w-e2e-'));
  const config = [
    `snapshot = ${join(FIXTURES, 'pinned_snapshot.json')}`,
    `index = ${join(FIXTURES, 'pinned_index.hwvw')}`,
    `ontology = ${join(FIXTURES, 'pinned_ontology.nt')}`,
    `fixture_dir = ${join(FIXTURES, 'advisor')}`,
    'llm_mode = FIXTURE',
    `bind = 127.0.0.1:${PORT}`,
    '',
  ].join('\n');
  const configPath = join(dir, 'service.cfg');
  writeFileSync(configPath, config);
  service = spawn('python3', ['-m', 'hwv2w.cli', 'serve', '--config', configPath], {
    cwd: ROOT,
    stdio: 'ignore',
  });
  await waitForHealth();
}, 30000);

afterAll(() => {
  service?.kill();
});

describe('fixture-mode service smoke', () => {
  it('analyze returns the pinned characterization', async () => {
    const response = await fetch(`${BASE}/api/analyze`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ description: 'electromagnetic side-channel', k: 5 }),
    });
    expect(response.status).toBe(200);
    const report = (await response.json()) as AnalysisReport;
    expect(report.matches.length).toBeLessThanOrEqual(5);
    expect(report.matches[0].cve_id).toBe('CVE-2020-6531');
    expect(report.matches[0].relevance_band).toBe('HIGH');
    expect(report.modal_cwe).toBe('CWE-203');
    expect(report.predicted_vector).toMatch(/^CVSS:3\.1\//);
  });

  it('mitigate flow completes offline with the fixture source url', async () => {
    const response = await fetch(`${BASE}/api/mitigate`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({
        description: 'electromagnetic side-channel',
        cwe_ids: ['CWE-203'],
      }),
    });
    expect(response.status).toBe(200);
    const result = (await response.json()) as MitigationResult;
    expect(result.fixture_mode).toBe(true);
    expect(result.source_urls).toEqual(['https://cwe.mitre.org/data/definitions/203.html']);
    expect(result.response).toContain('Separation of Privilege');
  });

  it('rejects empty-content descriptions with 422', async () => {
    const response = await fetch(`${BASE}/api/analyze`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ description: 'of the and' }),
    });
    expect(response.status).toBe(422);
  });
});
