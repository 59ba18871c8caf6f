/**
 * Reader for fingerprint batch files ("FPSD") and for the JSON sidecar that
 * describes the preprocessing applied when a batch was produced.
 *
 *   magic "FPSD" | u16 version | u32 header_len | header | u32 header_crc
 *   header: f64 alpha_norm | f64 gamma | u32 rows | u32 cols | u64 count
 *           | rows * (u32 ru, u32 ant) row order
 *   record: i64 t | 2 f64 label | rows u8 mask | rows*cols f64 values | u32 crc
 */

import { z } from "zod";
import { ByteReader, crc32, magicAt } from "./binary";
import { CorruptPayload, VersionMismatch } from "./dataset";

const MAGIC = "FPSD";
const FORMAT_VERSION = 1;

export type AntennaRef = readonly [ru: number, antenna: number];

export interface FingerprintSample {
  timestamp: number;
  /** Ground-truth planar position (x, y) in metres. */
  label: readonly [number, number];
  /** One byte per row: 1 = row kept, 0 = row zeroed by the threshold. */
  mask: Uint8Array;
  /** Row-major rows*cols normalized magnitudes. */
  values: Float64Array;
}

export interface FingerprintBatch {
  alphaNorm: number;
  gamma: number;
  rows: number;
  cols: number;
  rowOrder: AntennaRef[];
  samples: FingerprintSample[];
}

export function readFpsd(data: Uint8Array): FingerprintBatch {
  const r = new ByteReader(data);
  if (!magicAt(data, 0, MAGIC)) {
    throw new VersionMismatch("bad magic, not a fingerprint batch file");
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
  const alphaNorm = h.f64("alpha_norm");
  const gamma = h.f64("gamma");
  const rows = h.u32("rows");
  const cols = h.u32("cols");
  const count = h.u64("sample count");
  const rowOrder: AntennaRef[] = [];
  for (let i = 0; i < rows; i++) {
    rowOrder.push([h.u32(`row ${i} ru`), h.u32(`row ${i} antenna`)]);
  }

  const bodyLen = 24 + rows + rows * cols * 8;
  const samples: FingerprintSample[] = [];
  for (let i = 0; i < count; i++) {
    const body = r.raw(bodyLen, `sample ${i}`);
    const bodyCrc = r.u32(`sample ${i} crc`);
    if (crc32(body) !== bodyCrc) {
      throw new CorruptPayload(`checksum mismatch in sample ${i}`);
    }
    const b = new ByteReader(body);
    const timestamp = b.i64(`sample ${i} timestamp`);
    const label = [b.f64("label x"), b.f64("label y")] as const;
    const mask = new Uint8Array(b.raw(rows, `sample ${i} mask`));
    const values = b.f64Array(rows * cols, `sample ${i} values`);
    samples.push({ timestamp, label, mask, values });
  }
  if (r.remaining !== 0) {
    throw new CorruptPayload(`${r.remaining} trailing bytes after final sample`);
  }
  return { alphaNorm, gamma, rows, cols, rowOrder, samples };
}

const antennaRefSchema = z.tuple([
  z.number().int().nonnegative(),
  z.number().int().nonnegative(),
]);

export const sidecarSchema = z.object({
  alpha_norm: z.number().positive(),
  gamma: z.number().nonnegative(),
  columns: z.number().int().positive(),
  rows: z.number().int().positive(),
  row_order: z.array(antennaRefSchema),
  train_samples: z.number().int().nonnegative().optional(),
  test_samples: z.number().int().nonnegative().optional(),
});

export type Sidecar = z.infer<typeof sidecarSchema>;

/** Parse and validate sidecar JSON text; throws on anything malformed. */
export function parseSidecar(text: string): Sidecar {
  const sidecar = sidecarSchema.parse(JSON.parse(text));
  if (sidecar.row_order.length !== sidecar.rows) {
    throw new Error(
      `sidecar row_order has ${sidecar.row_order.length} entries, expected ${sidecar.rows}`,
    );
  }
  return sidecar;
}
