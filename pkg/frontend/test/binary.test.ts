import { describe, expect, it } from "vitest";
import { ByteReader, crc32, TruncatedData, UnsafeInteger } from "../src/binary";

const ascii = (s: string) => new TextEncoder().encode(s);

describe("crc32", () => {
  it("matches the classic check value", () => {
    expect(crc32(ascii("123456789"))).toBe(0xcbf43926);
  });

  it("of nothing is zero", () => {
    expect(crc32(new Uint8Array(0))).toBe(0);
  });

  it("chains across buffers", () => {
    const a = ascii("12345");
    const b = ascii("6789");
    expect(crc32(b, crc32(a))).toBe(crc32(ascii("123456789")));
  });
});

describe("ByteReader", () => {
  it("reads little-endian fields in sequence", () => {
    const buf = new Uint8Array(2 + 4 + 8 + 8);
    const view = new DataView(buf.buffer);
    view.setUint16(0, 0xbeef, true);
    view.setUint32(2, 0xdeadbeef, true);
    view.setFloat64(6, -2.44140625, true);
    view.setBigInt64(14, -42n, true);
    const r = new ByteReader(buf);
    expect(r.u16()).toBe(0xbeef);
    expect(r.u32()).toBe(0xdeadbeef);
    expect(r.f64()).toBe(-2.44140625);
    expect(r.i64()).toBe(-42);
    expect(r.remaining).toBe(0);
  });

  it("respects a subarray's byte offset", () => {
    const backing = new Uint8Array(16);
    backing.fill(0xff, 0, 4);
    const view = new DataView(backing.buffer);
    view.setUint32(4, 1234, true);
    const r = new ByteReader(backing.subarray(4));
    expect(r.u32()).toBe(1234);
  });

  it("raises on short reads with the field name", () => {
    const r = new ByteReader(new Uint8Array(3));
    expect(() => r.u32("record count")).toThrow(TruncatedData);
    expect(() => r.u32("record count")).toThrow(/record count/);
  });

  it("refuses 64-bit values that lose precision as numbers", () => {
    const buf = new Uint8Array(8);
    new DataView(buf.buffer).setBigUint64(0, 1n << 60n, true);
    expect(() => new ByteReader(buf).u64()).toThrow(UnsafeInteger);
    expect(new ByteReader(buf).u64big()).toBe(1n << 60n);
  });

  it("copies f64 arrays from unaligned offsets", () => {
    const buf = new Uint8Array(1 + 16);
    const view = new DataView(buf.buffer);
    view.setFloat64(1, 1.5, true);
    view.setFloat64(9, -0.25, true);
    const r = new ByteReader(buf);
    r.u8();
    const values = r.f64Array(2);
    expect(Array.from(values)).toEqual([1.5, -0.25]);
  });
});
