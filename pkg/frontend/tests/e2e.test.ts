// Protocol conformance against the live labeling service.
//
// Spawns the Python service with a fresh pair queue and drives scripted
// sessions through the real SessionController over HTTP:
//   - a completed 11-task batch with consistent answers is accepted and
//     persists exactly 10 choice records;
//   - an intentionally inconsistent duplicate answer causes rejection and
//     persists nothing;
//   - three unanimous sessions promote pairs into the training dataset,
//     while a 2-of-3 split does not.

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Batch, Choice, LabelServiceClient, Task } from "../src/api.js";
import { SessionController } from "../src/session.js";

const PYTHON = process.env.PYTHON ?? "python3";
const REPO_ROOT = join(__dirname, "..", "..");

interface Service {
  proc: ChildProcess;
  base: string;
  logPath: string;
  stop: () => void;
}

async function startService(nPairs: number, port: number): Promise<Service> {
  const dir = mkdtempSync(join(tmpdir(), "labelui-"));
  const pairsPath = join(dir, "pairs.jsonl");
  const logPath = join(dir, "choices.jsonl");
  const gen = spawnSync(
    PYTHON,
    [
      "-m", "layoutrank.cli", "gen-pairs",
      "--exp", "exp1", "-n", String(nPairs), "--seed", "77",
      "--out", pairsPath,
    ],
    { cwd: REPO_ROOT, encoding: "utf8" },
  );
  if (gen.status !== 0) {
    throw new Error(`gen-pairs failed: ${gen.stderr}`);
  }
  const proc = spawn(
    PYTHON,
    [
      "-m", "layoutrank.cli", "serve",
      "--pairs", pairsPath, "--log", logPath,
      "--host", "127.0.0.1", "--port", String(port),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  const base = `http://127.0.0.1:${port}`;
  const client = new LabelServiceClient(base);
  for (let i = 0; i < 100; i++) {
    if (await client.health()) {
      return { proc, base, logPath, stop: () => proc.kill("SIGTERM") };
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  proc.kill("SIGTERM");
  throw new Error("service did not become healthy");
}

// The duplicate never carries a flag; a scripted client can only find it
// by spotting the task whose SVGs are another task's, swapped.
function findDuplicate(batch: Batch): { original: number; duplicate: number } {
  for (let i = 0; i < batch.tasks.length; i++) {
    for (let j = i + 1; j < batch.tasks.length; j++) {
      if (
        batch.tasks[i].first_svg === batch.tasks[j].second_svg &&
        batch.tasks[i].second_svg === batch.tasks[j].first_svg
      ) {
        return { original: i, duplicate: j };
      }
    }
  }
  throw new Error("no swapped duplicate present in batch");
}

// Deterministic per-pair preference independent of presentation order.
function preferenceRule(task: Task): Choice {
  return task.first_svg < task.second_svg ? "first" : "second";
}

function contrarianRule(task: Task): Choice {
  return preferenceRule(task) === "first" ? "second" : "first";
}

async function runScriptedSession(
  base: string,
  session: string,
  rule: (t: Task) => Choice,
  sabotageDuplicate = false,
): Promise<"accepted" | "rejected"> {
  const client = new LabelServiceClient(base);
  const controller = new SessionController(client, session);
  await controller.start();
  expect(controller.totalTasks).toBe(11);
  const batch = {
    batch_id: "",
    session,
    layout: "stacked",
    tasks: controller.tasks.slice(),
  } as Batch;
  const dup = sabotageDuplicate ? findDuplicate(batch) : null;
  for (let i = 0; i < controller.totalTasks; i++) {
    const task = controller.currentTask!;
    let choice = rule(task);
    if (dup !== null && i === dup.duplicate) {
      choice = choice === "first" ? "second" : "first"; // contradict on purpose
    }
    controller.choose(choice);
  }
  const result = await controller.submit();
  return result.verdict;
}

function readLogRecords(logPath: string): unknown[] {
  if (!existsSync(logPath)) return [];
  return readFileSync(logPath, "utf8")
    .trim()
    .split("\n")
    .filter((l) => l.length > 0)
    .map((l) => JSON.parse(l));
}

describe("labeling protocol end-to-end", () => {
  let svc: Service;

  beforeAll(async () => {
    svc = await startService(10, 8331);
  }, 30_000);

  afterAll(() => {
    svc?.stop();
  });

  it("completes an 11-task batch; consistency controls persistence", async () => {
    // inconsistent duplicate first: rejected, nothing persisted
    const verdict1 = await runScriptedSession(svc.base, "e2e-bad", preferenceRule, true);
    expect(verdict1).toBe("rejected");
    const afterReject = readLogRecords(svc.logPath) as Array<{
      type: string;
      records?: unknown[];
    }>;
    expect(afterReject.every((e) => e.type === "batch_rejected")).toBe(true);

    // consistent session: accepted with exactly 10 records
    const verdict2 = await runScriptedSession(svc.base, "e2e-good", preferenceRule);
    expect(verdict2).toBe("accepted");
    const events = readLogRecords(svc.logPath) as Array<{
      type: string;
      records?: Array<{ session: string }>;
    }>;
    const accepted = events.filter((e) => e.type === "batch_accepted");
    expect(accepted).toHaveLength(1);
    expect(accepted[0].records).toHaveLength(10);

    const progress = await new LabelServiceClient(svc.base).progress();
    expect(progress.rejected).toBe(1);
    expect(progress.accepted).toBe(1);
  }, 30_000);

  it("three unanimous sessions promote pairs; 2-of-3 does not", async () => {
    // two more agreeing sessions complete the 3-rater quorum
    expect(await runScriptedSession(svc.base, "e2e-s2", preferenceRule)).toBe("accepted");
    expect(await runScriptedSession(svc.base, "e2e-s3", preferenceRule)).toBe("accepted");
    const client = new LabelServiceClient(svc.base);
    const progress = await client.progress();
    expect(progress.labeled).toBe(10);
    expect(progress.unanimous).toBe(10); // all three sessions agreed

    const exportResp = await fetch(`${svc.base}/api/export`);
    const lines = (await exportResp.text()).trim().split("\n");
    expect(lines).toHaveLength(10);
    for (const line of lines) {
      const pair = JSON.parse(line) as { label: string; provenance: string };
      expect(["a", "b"]).toContain(pair.label);
      expect(pair.provenance).toBe("human");
    }
  }, 30_000);

  it("a split vote discards instead of promoting", async () => {
    const svc2 = await startService(10, 8332);
    try {
      expect(await runScriptedSession(svc2.base, "sp-1", preferenceRule)).toBe("accepted");
      expect(await runScriptedSession(svc2.base, "sp-2", preferenceRule)).toBe("accepted");
      expect(await runScriptedSession(svc2.base, "sp-3", contrarianRule)).toBe("accepted");
      const progress = await new LabelServiceClient(svc2.base).progress();
      expect(progress.labeled).toBe(10);
      expect(progress.unanimous).toBe(0);
      const exportResp = await fetch(`${svc2.base}/api/export`);
      expect((await exportResp.text()).trim()).toBe("");
    } finally {
      svc2.stop();
    }
  }, 60_000);
});
