import { AlphabetError, FastaError } from "./errors.js";

export interface FastaRecord {
  id: string;
  residues: string;
}

// 20 amino acids plus 'X', the chain-separator/unknown residue the
// downstream loader's alphabet accepts.
export const ALPHABET = "ACDEFGHIKLMNPQRSTVWYX";
const VALID = new Set(ALPHABET);

/**
 * Parse FASTA text into records. The id is the first whitespace-delimited
 * token of the header. Multi-chain records may separate chains with ':';
 * each separator becomes a single 'X' residue, the same joining convention
 * the embedding consumer uses for multi-record protein files.
 */
export function parseFasta(text: string): FastaRecord[] {
  const records: FastaRecord[] = [];
  let header: string | null = null;
  let chunks: string[] = [];

  const flush = () => {
    if (header === null) return;
    const residues = chunks.join("").replace(/:/g, "X");
    if (residues.length === 0) {
      throw new FastaError(`record '${header}' has no sequence data`);
    }
    for (const c of residues) {
      if (!VALID.has(c)) {
        throw new AlphabetError(`record '${header}': residue '${c}' outside alphabet`);
      }
    }
    records.push({ id: header, residues });
  };

  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (line.length === 0) continue;
    if (line.startsWith(">")) {
      flush();
      header = line.slice(1).split(/\s+/)[0] || "unnamed";
      chunks = [];
    } else {
      if (header === null) {
        throw new FastaError("sequence data before any '>' header");
      }
      chunks.push(line.toUpperCase());
    }
  }
  flush();
  if (records.length === 0) {
    throw new FastaError("no FASTA records");
  }
  return records;
}
