/** Test helpers: spawn a live repair service on the bundled demo
 * fixture and wait until it answers. */

import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));
export const FIXTURES = join(here, "fixtures");
export const DEMO_DATA = join(FIXTURES, "demo.csv");
export const DEMO_RULES = join(FIXTURES, "demo.rules");
export const DEMO_TRUTH = join(FIXTURES, "truth.csv");

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address && typeof address === "object") {
        const port = address.port;
        probe.close(() => resolve(port));
      } else {
        probe.close(() => reject(new Error("no port assigned")));
      }
    });
  });
}

export interface LiveServer {
  base: string;
  stop: () => Promise<void>;
}

/** Start `cfdrepair serve` on the demo fixture and block until the
 * session endpoint responds.  Flags mirror the scripted review session:
 * small batches and a zero prediction threshold so the learner speaks
 * up as soon as it is trained. */
export async function startServer(): Promise<LiveServer> {
  const port = await freePort();
  const child: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "cfdrepair.cli",
      "serve",
      "--data",
      DEMO_DATA,
      "--rules",
      DEMO_RULES,
      "--truth",
      DEMO_TRUTH,
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
      "--batch-size",
      "2",
      "--threshold",
      "0",
      "--seed",
      "0",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let output = "";
  child.stdout?.on("data", (chunk) => (output += chunk));
  child.stderr?.on("data", (chunk) => (output += chunk));

  const base = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (child.exitCode !== null) {
      throw new Error(`server exited early (${child.exitCode}): ${output}`);
    }
    try {
      const response = await fetch(`${base}/api/session`);
      if (response.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`server never became ready: ${output}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }

  return {
    base,
    stop: () =>
      new Promise<void>((resolve) => {
        if (child.exitCode !== null) return resolve();
        child.once("exit", () => resolve());
        child.kill("SIGTERM");
        setTimeout(() => {
          if (child.exitCode === null) child.kill("SIGKILL");
        }, 3_000).unref();
      }),
  };
}
