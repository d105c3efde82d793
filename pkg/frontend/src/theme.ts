/** Relevance and severity color theme. Colors are a pure function of the
 * band/rating value so rendering stays display-only. */

import type { RelevanceBand } from './types.js';

export const BAND_COLORS: Record<RelevanceBand, string> = {
  HIGH: '#2e7d32', // green family
  MODERATE: '#ff8f00', // amber
  SOMEWHAT: '#757575', // gray
};

export const TOP_MATCH_COLOR = '#2e7d32';

export const RATING_COLORS: Record<string, string> = {
  None: '#9e9e9e',
  Low: '#388e3c',
  Medium: '#fbc02d',
  High: '#f57c00',
  Critical: '#d32f2f',
};

export const PIE_PALETTE = [
  '#1976d2',
  '#7b1fa2',
  '#00796b',
  '#c2185b',
  '#5d4037',
  '#455a64',
  '#afb42b',
  '#0097a7',
];

export function bandColor(band: RelevanceBand): string {
  return BAND_COLORS[band];
}

export function ratingColor(rating: string): string {
  return RATING_COLORS[rating] ?? '#9e9e9e';
}
