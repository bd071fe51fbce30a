/** Typed client for the annotation service HTTP interface. */

export interface StackInfo {
  bands: number;
  width: number;
  height: number;
  bit_depth: number;
  manifest: string | null;
}

export interface SessionInfo {
  session_id: string;
  stack: StackInfo | null;
  annotation_version: number;
  runs: string[];
}

export interface BandInfo {
  band_id: number;
  wavelength_nm: number;
  illumination: string;
  filter: string;
  width: number;
  height: number;
}

export interface AnnotationAck {
  counts: Record<string, number>;
  version: number;
  warnings: string[];
}

export interface RunRequest {
  method: string;
  k?: number;
  ridge?: number;
  mode?: string;
  percentile_p?: number;
  depth?: number;
  one_tail?: boolean;
  components?: number[];
  recipe?: [number, number, number];
  swap?: [number, number];
  region?: [number, number, number, number];
}

export interface MetricsRow {
  image: string;
  db: number | null;
  dunn: number | null;
  s_under: number | null;
  s_parchment: number | null;
  m: number | null;
  error: string | null;
}

export interface RunStatus {
  run_id: string;
  method: string;
  k: number | null;
  mode: string;
  status: "QUEUED" | "RUNNING" | "DONE" | "FAILED";
  error: string | null;
  artifacts: string[];
  preview: string | null;
  metrics: { rows: MetricsRow[]; best: string | null } | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function fail(resp: Response): Promise<never> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; the status line is all there is
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  getSession(): Promise<SessionInfo> {
    return this.json("/api/session");
  }

  postStack(manifest: string, crop?: [number, number, number, number], scope = "per-band"): Promise<StackInfo> {
    return this.json("/api/session/stack", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(crop ? { manifest, crop, scope } : { manifest, scope }),
    });
  }

  getBands(): Promise<BandInfo[]> {
    return this.json("/api/bands");
  }

  /** URL for a band PNG; scale is 1, 1/2, 1/4 or 1/8. */
  bandUrl(bandId: number, scale = "1"): string {
    return `${this.base}/api/band/${bandId}?scale=${encodeURIComponent(scale)}`;
  }

  async putAnnotations(csv: string): Promise<AnnotationAck> {
    return this.json("/api/annotations", {
      method: "PUT",
      headers: { "content-type": "text/csv" },
      body: csv,
    });
  }

  async getAnnotations(): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/api/annotations`);
    if (!resp.ok) await fail(resp);
    return resp.text();
  }

  postRun(req: RunRequest): Promise<{ run_id: string; status: string }> {
    return this.json("/api/runs", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getRun(runId: string): Promise<RunStatus> {
    return this.json(`/api/runs/${runId}`);
  }

  artifactUrl(runId: string, name: string): string {
    return `${this.base}/api/runs/${runId}/artifact/${encodeURIComponent(name)}`;
  }

  async getArtifact(runId: string, name: string): Promise<ArrayBuffer> {
    const resp = await this.fetchFn(this.artifactUrl(runId, name));
    if (!resp.ok) await fail(resp);
    return resp.arrayBuffer();
  }

  /**
   * Poll a run until DONE or FAILED. Resolves with the terminal status
   * either way; network errors and timeouts reject.
   */
  pollRun(
    runId: string,
    opts: { intervalMs?: number; timeoutMs?: number; onTick?: (s: RunStatus) => void } = {},
  ): Promise<RunStatus> {
    const intervalMs = opts.intervalMs ?? 1000;
    const deadline = Date.now() + (opts.timeoutMs ?? 300_000);
    return new Promise((resolve, reject) => {
      const poll = setInterval(async () => {
        try {
          const status = await this.getRun(runId);
          opts.onTick?.(status);
          if (status.status === "DONE" || status.status === "FAILED") {
            clearInterval(poll);
            resolve(status);
          } else if (Date.now() > deadline) {
            clearInterval(poll);
            reject(new Error(`run ${runId} still ${status.status} at timeout`));
          }
        } catch (err) {
          clearInterval(poll);
          reject(err);
        }
      }, intervalMs);
    });
  }
}
