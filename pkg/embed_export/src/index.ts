export { parseFasta, ALPHABET, type FastaRecord } from "./fasta.js";
export { encodeLnke, decodeLnke, sequenceHash, MAGIC, VERSION } from "./lnke.js";
export { Reference960, resolveProvider, type EmbeddingProvider } from "./provider.js";
export { runExport, embedRecord, type ExportJob, type ExportResult } from "./export.js";
export { FastaError, AlphabetError, ModelUnavailable, SequenceTooLong } from "./errors.js";
