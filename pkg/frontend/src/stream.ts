/**
 * Decoder for framed CIR stream messages ("CIRM") plus helpers for replaying
 * captures and regrouping a message flow into complete timestamps.
 *
 *   magic "CIRM" | body | u32 crc32(body)
 *   body: u16 schema | u64 seq | i64 t | u32 ru | u32 ant | u32 n_fft
 *         | f64 sample_period | u16 dep_len | dep_len utf-8 | 2*n_fft f64
 */

import { ByteReader, crc32, magicAt, TruncatedData, UnsafeInteger } from "./binary";

export class MalformedMessage extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedMessage";
  }
}

const MAGIC = "CIRM";
export const SCHEMA_VERSION = 1;
const FIXED_HEADER = 2 + 8 + 8 + 4 + 4 + 4 + 8 + 2;

export interface StreamMessage {
  schemaVersion: number;
  sequence: number;
  timestamp: number;
  ru: number;
  antenna: number;
  nFft: number;
  samplePeriod: number;
  deployment: string;
  /** Interleaved re/im pairs, length 2 * nFft. */
  payload: Float64Array;
}

export type DecodeOutcome =
  | { ok: true; message: StreamMessage; next: number }
  | { ok: false; reason: string; next: number | null };

/**
 * Try to decode one framed message starting at `offset`. On failure, `next`
 * is the end of the frame when the lengths could still be trusted, or null
 * when resynchronization by magic search is the only option.
 */
export function tryDecodeMessage(data: Uint8Array, offset = 0): DecodeOutcome {
  if (!magicAt(data, offset, MAGIC)) {
    return { ok: false, reason: "bad magic", next: null };
  }
  const bodyStart = offset + 4;
  if (data.length - bodyStart < FIXED_HEADER) {
    return { ok: false, reason: "truncated header", next: null };
  }
  const head = new ByteReader(data.subarray(bodyStart, bodyStart + FIXED_HEADER));
  let schemaVersion: number;
  let sequence: number;
  let timestamp: number;
  let ru: number;
  let antenna: number;
  let nFft: number;
  let samplePeriod: number;
  let depLen: number;
  try {
    schemaVersion = head.u16("schema version");
    sequence = head.u64("sequence");
    timestamp = head.i64("timestamp");
    ru = head.u32("ru");
    antenna = head.u32("antenna");
    nFft = head.u32("n_fft");
    samplePeriod = head.f64("sample period");
    depLen = head.u16("deployment length");
  } catch (err) {
    if (err instanceof UnsafeInteger) {
      return { ok: false, reason: err.message, next: null };
    }
    throw err;
  }

  const bodyLen = FIXED_HEADER + depLen + 16 * nFft;
  const next = bodyStart + bodyLen + 4;
  if (next > data.length) {
    return { ok: false, reason: "truncated payload", next: null };
  }
  const body = data.subarray(bodyStart, bodyStart + bodyLen);
  const crcView = new DataView(data.buffer, data.byteOffset + bodyStart + bodyLen, 4);
  if (crc32(body) !== crcView.getUint32(0, true)) {
    return { ok: false, reason: "checksum mismatch", next };
  }
  if (schemaVersion !== SCHEMA_VERSION) {
    return { ok: false, reason: `unsupported schema version ${schemaVersion}`, next };
  }

  const rest = new ByteReader(body.subarray(FIXED_HEADER));
  let deployment: string;
  try {
    deployment = new TextDecoder("utf-8", { fatal: true }).decode(
      rest.raw(depLen, "deployment id"),
    );
  } catch (err) {
    if (err instanceof TruncatedData || err instanceof TypeError) {
      return { ok: false, reason: "bad deployment id", next };
    }
    throw err;
  }
  const payload = rest.f64Array(2 * nFft, "payload");
  return {
    ok: true,
    message: {
      schemaVersion,
      sequence,
      timestamp,
      ru,
      antenna,
      nFft,
      samplePeriod,
      deployment,
      payload,
    },
    next,
  };
}

/** Decode one message or throw MalformedMessage. */
export function decodeMessage(data: Uint8Array, offset = 0): StreamMessage {
  const outcome = tryDecodeMessage(data, offset);
  if (!outcome.ok) {
    throw new MalformedMessage(outcome.reason);
  }
  return outcome.message;
}

function findMagic(data: Uint8Array, from: number): number {
  for (let i = from; i + 4 <= data.length; i++) {
    if (magicAt(data, i, MAGIC)) return i;
  }
  return -1;
}

export interface ScanResult {
  messages: StreamMessage[];
  /** Frames dropped for bad checksums, bad framing, or stray bytes. */
  malformed: number;
}

/**
 * Walk a capture of concatenated framed messages, decoding everything that
 * survives validation. After a damaged frame the scanner resynchronizes at
 * the end of the frame when its length fields were intact, otherwise at the
 * next magic tag.
 */
export function scanCapture(data: Uint8Array): ScanResult {
  const messages: StreamMessage[] = [];
  let malformed = 0;
  let offset = 0;
  while (offset < data.length) {
    const outcome = tryDecodeMessage(data, offset);
    if (outcome.ok) {
      messages.push(outcome.message);
      offset = outcome.next;
      continue;
    }
    malformed += 1;
    if (outcome.next !== null) {
      offset = outcome.next;
    } else {
      const resync = findMagic(data, offset + 1);
      if (resync < 0) break;
      offset = resync;
    }
  }
  return { messages, malformed };
}

export interface AssembledTimestamp {
  timestamp: number;
  messages: StreamMessage[];
}

/**
 * Regroups a message flow into complete timestamps. A timestamp is emitted
 * exactly once, when every expected (ru, antenna) pair has reported for it.
 * Messages whose per-antenna sequence number does not advance are counted as
 * duplicates and dropped; messages for an already-emitted timestamp are
 * counted as stale.
 */
export class TimestampAssembler {
  private readonly expected: Set<string>;
  private readonly lastSeq = new Map<string, number>();
  private readonly pending = new Map<number, Map<string, StreamMessage>>();
  private readonly emittedSet = new Set<number>();
  duplicates = 0;
  stale = 0;
  ignored = 0;

  constructor(rowOrder: ReadonlyArray<readonly [number, number]>) {
    this.expected = new Set(rowOrder.map(([ru, ant]) => `${ru}:${ant}`));
  }

  push(message: StreamMessage): AssembledTimestamp | null {
    const key = `${message.ru}:${message.antenna}`;
    if (!this.expected.has(key)) {
      this.ignored += 1;
      return null;
    }
    const last = this.lastSeq.get(key);
    if (last !== undefined && message.sequence <= last) {
      this.duplicates += 1;
      return null;
    }
    this.lastSeq.set(key, message.sequence);
    if (this.emittedSet.has(message.timestamp)) {
      this.stale += 1;
      return null;
    }
    let slot = this.pending.get(message.timestamp);
    if (!slot) {
      slot = new Map();
      this.pending.set(message.timestamp, slot);
    }
    slot.set(key, message);
    if (slot.size !== this.expected.size) {
      return null;
    }
    this.pending.delete(message.timestamp);
    this.emittedSet.add(message.timestamp);
    return { timestamp: message.timestamp, messages: [...slot.values()] };
  }

  /** Timestamps started but never completed (for end-of-stream reporting). */
  get incomplete(): number[] {
    return [...this.pending.keys()].sort((a, b) => a - b);
  }
}
