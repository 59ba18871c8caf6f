/**
 * Reader for CIR capture files ("CIRD"). The layout is:
 *
 *   magic "CIRD" | u16 version | u32 header_len | header | u32 header_crc
 *   header: u64 deployment_hash | u32 n_fft | f64 sample_period | u64 count
 *   record: i64 t | u32 ru | u32 ant | u8 flags | [3 f64 position]
 *           [f64 clock_offset] | 2*n_fft f64 samples | u32 crc
 *   flags: bit 0 = has position, bit 1 = has clock offset truth
 *
 * All integers and floats are little-endian; each CRC-32 covers the bytes
 * between the previous CRC (or the length prefix) and itself.
 */

import { ByteReader, crc32, magicAt } from "./binary";

export class VersionMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = "VersionMismatch";
  }
}

export class CorruptPayload extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CorruptPayload";
  }
}

const MAGIC = "CIRD";
const FORMAT_VERSION = 1;
const FLAG_POSITION = 0x01;
const FLAG_CLOCK = 0x02;

export interface CirRecord {
  timestamp: number;
  ru: number;
  antenna: number;
  /** Interleaved re/im pairs, length 2 * nFft. */
  samples: Float64Array;
  truth?: readonly [number, number, number];
  clockOffset?: number;
}

export interface CirDataset {
  deploymentHash: bigint;
  nFft: number;
  samplePeriod: number;
  records: CirRecord[];
}

export function readCird(data: Uint8Array): CirDataset {
  const r = new ByteReader(data);
  if (!magicAt(data, 0, MAGIC)) {
    throw new VersionMismatch("bad magic, not a CIR capture file");
  }
  r.offset = 4;
  const version = r.u16("version");
  if (version !== FORMAT_VERSION) {
    throw new VersionMismatch(`unsupported version ${version}`);
  }
  const headerLen = r.u32("header length");
  const header = r.raw(headerLen, "header");
  const headerCrc = r.u32("header crc");
  if (crc32(header) !== headerCrc) {
    throw new CorruptPayload("checksum mismatch in header");
  }
  const h = new ByteReader(header);
  const deploymentHash = h.u64big("deployment hash");
  const nFft = h.u32("n_fft");
  const samplePeriod = h.f64("sample period");
  const count = h.u64("record count");

  const records: CirRecord[] = [];
  for (let i = 0; i < count; i++) {
    const fixed = r.raw(17, `record ${i}`);
    const f = new ByteReader(fixed);
    const timestamp = f.i64(`record ${i} timestamp`);
    const ru = f.u32(`record ${i} ru`);
    const antenna = f.u32(`record ${i} antenna`);
    const flags = f.u8(`record ${i} flags`);
    const extraLen =
      (flags & FLAG_POSITION ? 24 : 0) + (flags & FLAG_CLOCK ? 8 : 0);
    const rest = r.raw(extraLen + 16 * nFft, `record ${i} payload`);
    const recordCrc = r.u32(`record ${i} crc`);
    if (crc32(rest, crc32(fixed)) !== recordCrc) {
      throw new CorruptPayload(`checksum mismatch in record ${i}`);
    }

    const body = new ByteReader(rest);
    let truth: CirRecord["truth"];
    if (flags & FLAG_POSITION) {
      truth = [
        body.f64("truth x"),
        body.f64("truth y"),
        body.f64("truth z"),
      ] as const;
    }
    let clockOffset: number | undefined;
    if (flags & FLAG_CLOCK) {
      clockOffset = body.f64("clock offset");
    }
    const samples = body.f64Array(2 * nFft, `record ${i} samples`);
    records.push({ timestamp, ru, antenna, samples, truth, clockOffset });
  }
  if (r.remaining !== 0) {
    throw new CorruptPayload(
      `${r.remaining} trailing bytes after final record`,
    );
  }
  return { deploymentHash, nFft, samplePeriod, records };
}
