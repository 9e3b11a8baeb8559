import { ModelUnavailable } from "./errors.js";
import { sequenceHash } from "./lnke.js";

export interface EmbeddingProvider {
  readonly id: string;
  readonly d: number;
  /** Longest sequence the model accepts. */
  readonly contextLimit: number;
  embed(residues: string): Float32Array;
}

/* xoshiro128** — 32-bit integer ops only (Math.imul + >>>), so the stream
 * is identical on every JS engine and platform. */
class Xoshiro {
  private s: Uint32Array;

  constructor(seed: Buffer) {
    this.s = new Uint32Array(4);
    for (let i = 0; i < 4; i++) this.s[i] = seed.readUInt32LE(4 * i);
    if ((this.s[0] | this.s[1] | this.s[2] | this.s[3]) === 0) this.s[0] = 1;
  }

  next(): number {
    const s = this.s;
    const result = Math.imul(rotl(Math.imul(s[1], 5), 7), 9) >>> 0;
    const t = (s[1] << 9) >>> 0;
    s[2] = (s[2] ^ s[0]) >>> 0;
    s[3] = (s[3] ^ s[1]) >>> 0;
    s[1] = (s[1] ^ s[2]) >>> 0;
    s[0] = (s[0] ^ s[3]) >>> 0;
    s[2] = (s[2] ^ t) >>> 0;
    s[3] = rotl(s[3], 11);
    return result;
  }
}

function rotl(x: number, k: number): number {
  return ((x << k) | (x >>> (32 - k))) >>> 0;
}

/**
 * Deterministic stand-in provider: rows are drawn from a PRNG seeded by the
 * SHA-256 of the residue string, so the same sequence always yields a
 * byte-identical file while different sequences decorrelate. Values lie in
 * [-1, 1). Format-complete (D=960) but carries no learned signal — intended
 * for pipeline plumbing, fixtures, and load testing.
 */
export class Reference960 implements EmbeddingProvider {
  readonly id = "reference-960";
  readonly d = 960;
  readonly contextLimit = 2048;

  embed(residues: string): Float32Array {
    const rng = new Xoshiro(sequenceHash(residues));
    const out = new Float32Array(residues.length * this.d);
    for (let i = 0; i < out.length; i++) {
      out[i] = rng.next() / 2147483648.0 - 1.0;
    }
    return out;
  }
}

/** Real checkpoints we know the names of but cannot fetch here. */
const KNOWN_REMOTE = new Map<string, string>([
  ["esmc-300m", "D=960 protein language model"],
  ["esmc-600m", "D=1152 protein language model"],
]);

export function resolveProvider(modelId: string): EmbeddingProvider {
  if (modelId === "reference-960") {
    return new Reference960();
  }
  if (KNOWN_REMOTE.has(modelId)) {
    throw new ModelUnavailable(
      modelId,
      `${KNOWN_REMOTE.get(modelId)}; pretrained weights are not bundled and ` +
        "cannot be downloaded in this environment. Use reference-960 for " +
        "format-complete output.",
    );
  }
  const known = ["reference-960", ...KNOWN_REMOTE.keys()].join(", ");
  throw new ModelUnavailable(modelId, `unknown model id (known: ${known})`);
}
