/** Thin fetch wrappers over the analyst service JSON API. */

import type { AnalysisReport, ApiError, BindingSet, MitigationResult } from './types.js';

export class ServiceError extends Error {
  constructor(
    public status: number,
    public payload: ApiError,
  ) {
    super(payload.message);
  }
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  const response = await fetch(base + path, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  const payload = await response.json();
  if (!response.ok) {
    throw new ServiceError(response.status, payload as ApiError);
  }
  return payload as T;
}

export function analyze(base: string, description: string, k?: number): Promise<AnalysisReport> {
  return post<AnalysisReport>(base, '/api/analyze', k ? { description, k } : { description });
}

export function mitigate(
  base: string,
  description: string,
  cweIds: string[],
): Promise<MitigationResult> {
  return post<MitigationResult>(base, '/api/mitigate', { description, cwe_ids: cweIds });
}

export function ontologyQuery(base: string, queryText: string): Promise<BindingSet> {
  return post<BindingSet>(base, '/api/ontology/query', { query_text: queryText });
}

export async function health(base: string): Promise<boolean> {
  try {
    const response = await fetch(base + '/api/health');
    return response.ok;
  } catch {
    return false;
  }
}
