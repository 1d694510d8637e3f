// DOM layer: stacked chart pair, two choice buttons, progress counters.
// Server-provided SVG is injected verbatim; the client never re-lays-out
// charts, so labelers see exactly what the renderer produced.

import { Choice } from "./api.js";
import { SessionController } from "./session.js";

const PROMPT = "Which of the following two layouts do you prefer, in terms of aesthetics?";

export class LabelView {
  private root: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly controller: SessionController,
  ) {
    this.root = root;
    document.addEventListener("keydown", (ev) => {
      if (ev.key === "1") this.handleChoice("first");
      if (ev.key === "2") this.handleChoice("second");
    });
  }

  async run(): Promise<void> {
    await this.nextBatch();
  }

  private async nextBatch(): Promise<void> {
    this.renderMessage("Loading tasks…");
    try {
      await this.controller.start();
    } catch (err) {
      this.renderMessage(`No tasks available: ${(err as Error).message}`, true);
      return;
    }
    this.renderTask();
  }

  private handleChoice(choice: Choice): void {
    if (this.controller.phase !== "labeling") return;
    const before = this.controller.taskIndex;
    this.controller.choose(choice);
    if (this.controller.complete && before === this.controller.totalTasks - 1) {
      void this.submit();
    } else {
      this.renderTask();
    }
  }

  private async submit(): Promise<void> {
    this.renderMessage("Submitting…");
    try {
      const result = await this.controller.submit();
      const progress = await this.controller.progress();
      const note =
        result.verdict === "accepted"
          ? "Batch accepted. Thank you!"
          : "Batch rejected: answers to a repeated task disagreed.";
      this.renderMessage(
        `${note}<br>Pairs labeled so far: ${progress.labeled} (unanimous: ${progress.unanimous}).` +
          `<br><button id="next-batch">Label another batch</button>`,
      );
      const btn = document.getElementById("next-batch");
      btn?.addEventListener("click", () => void this.nextBatch());
    } catch (err) {
      this.renderMessage(`Submission failed: ${(err as Error).message}`, true);
    }
  }

  private renderTask(): void {
    const task = this.controller.currentTask;
    if (!task) return;
    const i = this.controller.taskIndex + 1;
    const n = this.controller.totalTasks;
    this.root.innerHTML = `
      <header>
        <p class="prompt">${PROMPT}</p>
        <p class="progress">Task ${i} of ${n}</p>
      </header>
      <div class="pair">
        <figure class="chart" id="chart-first">${task.first_svg}</figure>
        <figure class="chart" id="chart-second">${task.second_svg}</figure>
      </div>
      <div class="controls">
        <button id="pick-first">Top (1)</button>
        <button id="pick-second">Bottom (2)</button>
        <button id="go-back" ${i === 1 ? "disabled" : ""}>Back</button>
      </div>`;
    document
      .getElementById("pick-first")!
      .addEventListener("click", () => this.handleChoice("first"));
    document
      .getElementById("pick-second")!
      .addEventListener("click", () => this.handleChoice("second"));
    document.getElementById("go-back")!.addEventListener("click", () => {
      this.controller.back();
      this.renderTask();
    });
  }

  private renderMessage(html: string, isError = false): void {
    this.root.innerHTML = `<p class="${isError ? "error" : "status"}">${html}</p>`;
  }
}
