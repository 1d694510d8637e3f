// Session state machine: fetch a batch, force a choice per task, submit.
//
// The two-alternative forced-choice contract lives here: the only way to
// advance past a task is choose(); there is no skip, and submit() refuses
// incomplete batches.  Tasks render in exactly the served order, and the
// submission echoes the served task ids.

import {
  Batch,
  Choice,
  ChoiceSubmission,
  LabelServiceClient,
  Progress,
  SubmitResult,
  Task,
} from "./api.js";

export type SessionPhase = "idle" | "labeling" | "submitting" | "done";

export class SessionController {
  private batch: Batch | null = null;
  private choices = new Map<string, Choice>();
  private cursor = 0;
  phase: SessionPhase = "idle";
  lastResult: SubmitResult | null = null;
  batchesCompleted = 0;

  constructor(
    private readonly client: LabelServiceClient,
    readonly session: string,
  ) {}

  get tasks(): readonly Task[] {
    return this.batch ? this.batch.tasks : [];
  }

  get taskIndex(): number {
    return this.cursor;
  }

  get currentTask(): Task | null {
    return this.batch ? (this.batch.tasks[this.cursor] ?? null) : null;
  }

  get totalTasks(): number {
    return this.batch ? this.batch.tasks.length : 0;
  }

  choiceFor(taskId: string): Choice | undefined {
    return this.choices.get(taskId);
  }

  async start(): Promise<void> {
    this.batch = await this.client.getBatch(this.session);
    this.choices.clear();
    this.cursor = 0;
    this.lastResult = null;
    this.phase = "labeling";
  }

  /** Record the forced choice for the current task and advance. */
  choose(choice: Choice): void {
    const task = this.currentTask;
    if (this.phase !== "labeling" || task === null) {
      throw new Error("no task awaiting a choice");
    }
    this.choices.set(task.task_id, choice);
    if (this.cursor < this.totalTasks - 1) {
      this.cursor += 1;
    }
  }

  /** Step back to revisit an earlier answer (never skips forward). */
  back(): void {
    if (this.cursor > 0) this.cursor -= 1;
  }

  get complete(): boolean {
    return (
      this.batch !== null &&
      this.batch.tasks.every((t) => this.choices.has(t.task_id))
    );
  }

  submission(): ChoiceSubmission[] {
    if (this.batch === null) throw new Error("no active batch");
    return this.batch.tasks.map((t) => {
      const choice = this.choices.get(t.task_id);
      if (choice === undefined) {
        throw new Error(`task ${t.task_id} has no choice; choices are mandatory`);
      }
      return { task_id: t.task_id, choice };
    });
  }

  async submit(): Promise<SubmitResult> {
    if (this.batch === null) throw new Error("no active batch");
    if (!this.complete) {
      throw new Error("cannot submit: every task needs a choice first");
    }
    this.phase = "submitting";
    const result = await this.client.submitBatch(
      this.session,
      this.batch.batch_id,
      this.submission(),
    );
    this.lastResult = result;
    this.phase = "done";
    this.batch = null;
    if (result.verdict === "accepted") this.batchesCompleted += 1;
    return result;
  }

  async progress(): Promise<Progress> {
    return this.client.progress();
  }
}
