import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { BindingError } from "./errors.js";

/**
 * Run a heatboxes CLI subcommand and return its stdout.
 *
 * The interpreter defaults to `python3` and can be overridden with the
 * HEATBOXES_PYTHON environment variable. Nonzero exits surface the CLI's
 * one-line diagnostic.
 */
export function runHeatboxes(args: string[], cwd?: string): string {
  const python = process.env.HEATBOXES_PYTHON ?? "python3";
  const result = spawnSync(python, ["-m", "heatboxes", ...args], {
    encoding: "utf8",
    cwd,
    maxBuffer: 1 << 28,
  });
  if (result.error) {
    throw new BindingError("backend", `failed to launch ${python}: ${result.error.message}`);
  }
  if (result.status !== 0) {
    const detail = (result.stderr ?? "").trim() || `exit status ${result.status}`;
    throw new BindingError("backend", detail);
  }
  return result.stdout;
}

/** Run `fn` with a private scratch directory, removed afterwards. */
export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "heatboxes-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
