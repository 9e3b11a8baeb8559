/** Error taxonomy: anything user-correctable carries a record id when the
 * failure is per-record, so batch runs can report and continue. */

export class FastaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "FastaError";
  }
}

export class ModelUnavailable extends Error {
  constructor(modelId: string, detail: string) {
    super(`model '${modelId}' unavailable: ${detail}`);
    this.name = "ModelUnavailable";
  }
}

export class SequenceTooLong extends Error {
  readonly recordId: string;
  constructor(recordId: string, length: number, limit: number) {
    super(`${recordId}: ${length} residues exceeds the model context limit ${limit}`);
    this.name = "SequenceTooLong";
    this.recordId = recordId;
  }
}

export class AlphabetError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "AlphabetError";
  }
}
