import { createHash } from "node:crypto";

/**
 * LNKE container, the binary boundary to the prediction package:
 *
 *   "LNKE" | version u32 LE | sha256(residues) 32 bytes | R u32 | D u32
 *   | R*D float32 LE, row-major
 *
 * The hash is over the exact residue string, so a mispaired or stale file
 * is rejected by the reader instead of silently embedding the wrong protein.
 */

export const MAGIC = "LNKE";
export const VERSION = 1;

export function sequenceHash(residues: string): Buffer {
  return createHash("sha256").update(residues, "ascii").digest();
}

export function encodeLnke(residues: string, matrix: Float32Array, d: number): Buffer {
  const r = residues.length;
  if (matrix.length !== r * d) {
    throw new Error(`matrix length ${matrix.length} != R*D = ${r * d}`);
  }
  const header = Buffer.alloc(4 + 4 + 32 + 8);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  sequenceHash(residues).copy(header, 8);
  header.writeUInt32LE(r, 40);
  header.writeUInt32LE(d, 44);

  const payload = Buffer.alloc(4 * matrix.length);
  for (let i = 0; i < matrix.length; i++) {
    payload.writeFloatLE(matrix[i], 4 * i);
  }
  return Buffer.concat([header, payload]);
}

/** Minimal reader used by tests to confirm what we wrote. */
export function decodeLnke(buf: Buffer): {
  hash: Buffer;
  r: number;
  d: number;
  matrix: Float32Array;
} {
  if (buf.subarray(0, 4).toString("ascii") !== MAGIC) {
    throw new Error("bad magic");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported version ${version}`);
  }
  const hash = Buffer.from(buf.subarray(8, 40));
  const r = buf.readUInt32LE(40);
  const d = buf.readUInt32LE(44);
  const expected = 48 + 4 * r * d;
  if (buf.length !== expected) {
    throw new Error(`payload ${buf.length - 48} bytes, expected ${4 * r * d}`);
  }
  const matrix = new Float32Array(r * d);
  for (let i = 0; i < matrix.length; i++) {
    matrix[i] = buf.readFloatLE(48 + 4 * i);
  }
  return { hash, r, d, matrix };
}
