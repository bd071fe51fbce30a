/**
 * Run form state. Pure logic so the gating rules are testable: supervised
 * methods stay disabled until at least two classes have points, and only
 * one run may be in flight at a time.
 */

import type { RunRequest } from "./api.js";

export const METHODS = ["cva", "lda", "pca", "pca_unsupervised"] as const;
export type Method = (typeof METHODS)[number];

// these consume the annotated training points; pca_unsupervised works on a
// pixel region instead
export const SUPERVISED: readonly Method[] = ["cva", "lda", "pca"];

export const RENDER_MODES = ["full", "training", "p0.01", "p0.1", "p1", "p5"] as const;

export interface RunConfig {
  method: Method;
  k: number | null;
  mode: string;
  depth: 8 | 16;
  recipe: [number, number, number] | null;
  swapChannels: boolean;
  region: [number, number, number, number] | null;
}

export function defaultConfig(): RunConfig {
  return {
    method: "cva",
    k: null,
    mode: "full",
    depth: 8,
    recipe: [1, 0, 2],
    swapChannels: false,
    region: null,
  };
}

export function annotatedClassCount(counts: Record<string, number>): number {
  return Object.values(counts).filter((n) => n > 0).length;
}

/**
 * Why the run button is disabled, or null if it may be pressed. The string
 * doubles as the button tooltip.
 */
export function disabledReason(
  config: RunConfig,
  counts: Record<string, number>,
  inFlight: boolean,
): string | null {
  if (inFlight) return "a run is already in progress";
  if (SUPERVISED.includes(config.method)) {
    const annotated = annotatedClassCount(counts);
    if (annotated < 2) {
      return `${config.method} needs points in at least 2 classes (${annotated} annotated)`;
    }
    if (config.method === "lda" && annotated !== 2) {
      return `lda needs exactly 2 annotated classes (${annotated} annotated)`;
    }
  } else if (config.region === null) {
    return "pca_unsupervised needs a region";
  }
  return null;
}

/** Build the request body, leaving defaulted fields to the server. */
export function buildRequest(config: RunConfig): RunRequest {
  const req: RunRequest = { method: config.method, mode: config.mode };
  if (config.k !== null) req.k = config.k;
  if (config.depth !== 8) req.depth = config.depth;
  if (config.recipe !== null) {
    req.recipe = config.recipe;
    // exchanging the first two channels of the composite
    if (config.swapChannels) req.swap = [1, 2];
  }
  if (config.region !== null) req.region = config.region;
  return req;
}
