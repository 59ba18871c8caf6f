import * as fs from "fs";
import * as path from "path";
import { fileURLToPath } from "url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ensureBackend } from "../src/backend";
import { parseSidecar, readFpsd, Sidecar } from "../src/fingerprint";
import { InferenceHost, serveCapture } from "../src/host";
import { buildModel } from "../src/model";
import { scanCapture } from "../src/stream";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixture = (name: string) =>
  new Uint8Array(fs.readFileSync(path.join(here, "fixtures", name)));
const sidecar: Sidecar = parseSidecar(
  fs.readFileSync(path.join(here, "fixtures", "sidecar.json"), "utf-8"),
);

let model: ReturnType<typeof buildModel>;

beforeAll(async () => {
  await ensureBackend();
  model = buildModel({ rows: sidecar.rows, cols: sidecar.columns }, 17);
});

afterAll(() => {
  model.dispose();
});

describe("serveCapture", () => {
  it("produces exactly one estimate per timestamp", () => {
    const report = serveCapture(fixture("capture.bin"), model, sidecar);
    expect(report.malformed).toBe(0);
    expect(report.duplicates).toBe(0);
    expect(report.estimates.map((e) => e.timestamp)).toEqual([0, 1, 2, 3, 4]);
    for (const e of report.estimates) {
      expect(Number.isFinite(e.x)).toBe(true);
      expect(Number.isFinite(e.y)).toBe(true);
      expect(e.rowsKept).toBeGreaterThan(0);
    }
  });

  it("survives duplicates and corruption with identical estimates", () => {
    const clean = serveCapture(fixture("capture.bin"), model, sidecar);
    const seen: number[] = [];
    const damaged = serveCapture(
      fixture("capture_faulty.bin"),
      model,
      sidecar,
      (e) => seen.push(e.timestamp),
    );
    expect(damaged.malformed).toBe(1);
    expect(damaged.duplicates).toBe(1);
    expect(damaged.incomplete).toEqual([]);
    expect(seen).toEqual([0, 1, 2, 3, 4]);
    expect(damaged.estimates).toEqual(clean.estimates);
  });
});

describe("InferenceHost", () => {
  it("feeds one message at a time and fires on completion", () => {
    const host = new InferenceHost(model, sidecar);
    const scan = scanCapture(fixture("capture.bin"));
    let estimates = 0;
    for (const m of scan.messages.slice(0, 16)) {
      const e = host.feed(m);
      if (e !== null) {
        estimates += 1;
        expect(e.timestamp).toBe(0);
      }
    }
    expect(estimates).toBe(1);
  });

  it("builds the same image the producer toolchain stored", () => {
    const host = new InferenceHost(model, sidecar);
    const scan = scanCapture(fixture("capture.bin"));
    const batch = readFpsd(fixture("train.fpsd"));
    const byTimestamp = new Map(batch.samples.map((s) => [s.timestamp, s]));

    for (let t = 0; t < 5; t++) {
      const messages = scan.messages.filter((m) => m.timestamp === t);
      expect(messages).toHaveLength(16);
      const image = host.imageFor(messages);
      const stored = byTimestamp.get(t);
      expect(stored).toBeDefined();
      expect(Array.from(image.mask)).toEqual(Array.from(stored!.mask));
      let worst = 0;
      for (let i = 0; i < image.values.length; i++) {
        const rel =
          Math.abs(image.values[i] - stored!.values[i]) /
          Math.max(1, Math.abs(stored!.values[i]));
        worst = Math.max(worst, rel);
      }
      expect(worst).toBeLessThanOrEqual(1e-6);
    }
  });

  it("rejects a model that disagrees with the sidecar", () => {
    const small = buildModel({ rows: 4, cols: 10 });
    expect(() => new InferenceHost(small, sidecar)).toThrow(/sidecar/);
    small.dispose();
  });
});
