#!/usr/bin/env node
/**
 * embed-export --fasta in.fa --out dir/ --model <id>
 *
 * Writes one LNKE embedding file per FASTA record. Exit codes: 0 all
 * records written, 2 usage, 3 input/model problems (including any
 * per-record failure; the other records are still written). Failures are
 * reported as JSON lines on stderr.
 */

import { runExport } from "./export.js";

const USAGE =
  "usage: embed-export --fasta <in.fa> --out <dir> --model <id>\n" +
  "  --fasta   input FASTA (multi-record; chains may be separated by ':')\n" +
  "  --out     output directory, one <record-id>.lnke per record\n" +
  "  --model   embedding model id; 'reference-960' is the deterministic\n" +
  "            built-in, real checkpoints report ModelUnavailable here\n";

function parseArgs(argv: string[]): { fasta: string; out: string; model: string } {
  const opts = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "-h" || a === "--help") {
      process.stdout.write(USAGE);
      process.exit(0);
    }
    if (!a.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`unexpected argument '${a}'`);
    }
    opts.set(a.slice(2), argv[++i]);
  }
  for (const key of ["fasta", "out", "model"]) {
    if (!opts.has(key)) throw new UsageError(`missing --${key}`);
  }
  for (const key of opts.keys()) {
    if (!["fasta", "out", "model"].includes(key)) {
      throw new UsageError(`unknown option --${key}`);
    }
  }
  return {
    fasta: opts.get("fasta")!,
    out: opts.get("out")!,
    model: opts.get("model")!,
  };
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  let job;
  try {
    job = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }
  try {
    const result = runExport(job);
    for (const f of result.failures) {
      process.stderr.write(JSON.stringify(f) + "\n");
    }
    process.stdout.write(
      JSON.stringify({ written: result.written.length, failed: result.failures.length }) + "\n",
    );
    return result.failures.length === 0 ? 0 : 3;
  } catch (err) {
    const e = err as Error;
    process.stderr.write(JSON.stringify({ error: e.name, message: e.message }) + "\n");
    return 3;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
