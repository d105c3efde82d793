/** Payload shapes mirroring the analyst service JSON API. */

export type RelevanceBand = 'HIGH' | 'MODERATE' | 'SOMEWHAT';

export interface Match {
  cve_id: string;
  similarity: number;
  relevance_band: RelevanceBand;
  cwe_ids: string[];
  description: string;
  cvss_vector: string | null;
}

export interface Scores {
  exploitability: number;
  impact: number;
  base: number;
  rating: string;
}

export interface StoryPath {
  vulnerability: string;
  exploit_target: string;
  attack_impact: string;
  cwes: string[];
}

export interface Story {
  start: string;
  paths: StoryPath[];
  edges: [string, string, string][];
  adjacency: Record<string, [string, string][]>;
}

export interface MitigationResult {
  prompt: string;
  response: string;
  source_urls: string[];
  warnings: string[];
  fixture_mode?: boolean;
}

export interface AnalysisReport {
  query: string;
  matches: Match[];
  cwe_distribution: Record<string, number>;
  modal_cwe: string;
  predicted_vector: string | null;
  scores: Scores | null;
  story: Story | null;
  mitigation: MitigationResult | null;
}

export interface BindingSet {
  variables: string[];
  rows: Record<string, string>[];
}

export interface ApiError {
  code: string;
  message: string;
  detail: unknown;
}
