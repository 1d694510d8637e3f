// Typed client for the labeling service HTTP+JSON API.

export type Choice = "first" | "second";

export interface Task {
  task_id: string;
  first_svg: string;
  second_svg: string;
}

export interface Batch {
  batch_id: string;
  session: string;
  layout: string;
  tasks: Task[];
}

export interface ChoiceSubmission {
  task_id: string;
  choice: Choice;
}

export interface SubmitResult {
  verdict: "accepted" | "rejected";
  reason?: string;
}

export interface Progress {
  pending: number;
  labeled: number;
  unanimous: number;
  rejected: number;
  accepted: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    if (body.error) return body.error;
  } catch {
    // non-JSON error body
  }
  return `request failed with status ${resp.status}`;
}

export class LabelServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
    private readonly retries = 2,
    private readonly retryDelayMs = 300,
  ) {}

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/api/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  // Batch fetching is idempotent server-side (an open batch is re-served
  // verbatim), so transient network failures simply retry.
  async getBatch(session: string): Promise<Batch> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      try {
        const resp = await this.fetchImpl(
          `${this.baseUrl}/api/batch?session=${encodeURIComponent(session)}`,
        );
        if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
        return (await resp.json()) as Batch;
      } catch (err) {
        if (err instanceof ApiError) throw err; // server verdicts don't retry
        lastError = err;
        if (attempt < this.retries) {
          await new Promise((r) => setTimeout(r, this.retryDelayMs));
        }
      }
    }
    throw lastError instanceof Error ? lastError : new Error(String(lastError));
  }

  async submitBatch(
    session: string,
    batchId: string,
    choices: ChoiceSubmission[],
  ): Promise<SubmitResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/batch`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session, batch_id: batchId, choices }),
    });
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as SubmitResult;
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as Progress;
  }
}
