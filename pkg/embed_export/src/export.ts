import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { SequenceTooLong } from "./errors.js";
import { parseFasta, type FastaRecord } from "./fasta.js";
import { encodeLnke } from "./lnke.js";
import { resolveProvider, type EmbeddingProvider } from "./provider.js";

export interface ExportJob {
  fasta: string;
  out: string;
  model: string;
}

export interface RecordFailure {
  id: string;
  error: string;
  message: string;
}

export interface ExportResult {
  written: string[];
  failures: RecordFailure[];
}

export function embedRecord(provider: EmbeddingProvider, rec: FastaRecord): Buffer {
  if (rec.residues.length > provider.contextLimit) {
    throw new SequenceTooLong(rec.id, rec.residues.length, provider.contextLimit);
  }
  return encodeLnke(rec.residues, provider.embed(rec.residues), provider.d);
}

/**
 * Run one export job: every record gets its own `<id>.lnke` file in the
 * output directory. Per-record failures (e.g. over the context limit) are
 * collected and the remaining records still export. File-level problems
 * (unreadable/corrupt FASTA, unknown model) throw instead.
 */
export function runExport(job: ExportJob): ExportResult {
  const provider = resolveProvider(job.model);
  const records = parseFasta(readFileSync(job.fasta, "utf-8"));
  mkdirSync(job.out, { recursive: true });

  const result: ExportResult = { written: [], failures: [] };
  for (const rec of records) {
    try {
      if (/[/\\\0]/.test(rec.id)) {
        throw new Error(`record id '${rec.id}' is not a valid file name`);
      }
      const path = join(job.out, `${rec.id}.lnke`);
      writeFileSync(path, embedRecord(provider, rec));
      result.written.push(path);
    } catch (err) {
      const e = err as Error;
      result.failures.push({ id: rec.id, error: e.name, message: e.message });
    }
  }
  return result;
}
