/**
 * Low-level helpers for the little-endian binary formats produced by the
 * positioning toolchain. Every multi-byte field is little-endian and every
 * checksum is a plain CRC-32 (the zlib polynomial) over the bytes it follows.
 */

const CRC_TABLE: Uint32Array = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

/**
 * CRC-32 of `data`. Pass a previous result as `seed` to continue a running
 * checksum across several buffers: crc32(b, crc32(a)) === crc32(concat(a, b)).
 */
export function crc32(data: Uint8Array, seed = 0): number {
  let c = ~seed >>> 0;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return ~c >>> 0;
}

/** Raised when a buffer ends before the field being parsed. */
export class TruncatedData extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TruncatedData";
  }
}

/** Raised when a 64-bit integer field cannot be represented as a JS number. */
export class UnsafeInteger extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UnsafeInteger";
  }
}

const MAX_SAFE = BigInt(Number.MAX_SAFE_INTEGER);
const MIN_SAFE = BigInt(Number.MIN_SAFE_INTEGER);

export function toSafeNumber(value: bigint, what: string): number {
  if (value > MAX_SAFE || value < MIN_SAFE) {
    throw new UnsafeInteger(`${what} (${value}) exceeds the safe integer range`);
  }
  return Number(value);
}

/**
 * Sequential little-endian reader over a Uint8Array. All reads advance the
 * offset; short reads raise TruncatedData with the field name.
 */
export class ByteReader {
  private readonly view: DataView;
  offset = 0;

  constructor(private readonly data: Uint8Array) {
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  get remaining(): number {
    return this.data.length - this.offset;
  }

  private need(count: number, what: string): void {
    if (this.remaining < count) {
      throw new TruncatedData(
        `short read for ${what}: wanted ${count} bytes, have ${this.remaining}`,
      );
    }
  }

  u8(what = "u8"): number {
    this.need(1, what);
    return this.view.getUint8(this.offset++);
  }

  u16(what = "u16"): number {
    this.need(2, what);
    const value = this.view.getUint16(this.offset, true);
    this.offset += 2;
    return value;
  }

  u32(what = "u32"): number {
    this.need(4, what);
    const value = this.view.getUint32(this.offset, true);
    this.offset += 4;
    return value;
  }

  /** Unsigned 64-bit field as a bigint (for hashes that may use all 64 bits). */
  u64big(what = "u64"): bigint {
    this.need(8, what);
    const value = this.view.getBigUint64(this.offset, true);
    this.offset += 8;
    return value;
  }

  /** Unsigned 64-bit field as a number; throws if it cannot be exact. */
  u64(what = "u64"): number {
    return toSafeNumber(this.u64big(what), what);
  }

  /** Signed 64-bit field as a number; throws if it cannot be exact. */
  i64(what = "i64"): number {
    this.need(8, what);
    const value = this.view.getBigInt64(this.offset, true);
    this.offset += 8;
    return toSafeNumber(value, what);
  }

  f64(what = "f64"): number {
    this.need(8, what);
    const value = this.view.getFloat64(this.offset, true);
    this.offset += 8;
    return value;
  }

  /** A raw slice of `count` bytes (a view, not a copy). */
  raw(count: number, what = "bytes"): Uint8Array {
    this.need(count, what);
    const slice = this.data.subarray(this.offset, this.offset + count);
    this.offset += count;
    return slice;
  }

  /**
   * `count` little-endian f64 values copied into a Float64Array. Uses the
   * DataView path because record payloads sit at arbitrary byte offsets.
   */
  f64Array(count: number, what = "f64 array"): Float64Array {
    this.need(count * 8, what);
    const out = new Float64Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = this.view.getFloat64(this.offset + 8 * i, true);
    }
    this.offset += count * 8;
    return out;
  }
}

/** True when the next bytes at `offset` equal the ASCII `magic` string. */
export function magicAt(data: Uint8Array, offset: number, magic: string): boolean {
  if (offset + magic.length > data.length) return false;
  for (let i = 0; i < magic.length; i++) {
    if (data[offset + i] !== magic.charCodeAt(i)) return false;
  }
  return true;
}
