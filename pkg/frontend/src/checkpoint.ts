/**
 * Checkpoint directory layout:
 *
 *   model.json   - layer topology plus weight manifest (self-describing:
 *                  loading needs nothing but this directory)
 *   weights.bin  - raw little-endian weight buffer
 *   meta.json    - training provenance (epochs, learning rate, losses)
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

export interface CheckpointMeta {
  rows: number;
  cols: number;
  epochs?: number;
  learningRate?: number;
  seed?: number;
  initialLoss?: number;
  finalLoss?: number;
  samples?: number;
}

function joinBuffers(data: ArrayBuffer | ArrayBuffer[]): ArrayBuffer {
  if (!Array.isArray(data)) {
    return data;
  }
  const total = data.reduce((acc, b) => acc + b.byteLength, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const b of data) {
    out.set(new Uint8Array(b), offset);
    offset += b.byteLength;
  }
  return out.buffer;
}

export async function saveCheckpoint(
  model: tf.LayersModel,
  dir: string,
  meta: CheckpointMeta,
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const manifest = {
        modelTopology: artifacts.modelTopology,
        weightSpecs: artifacts.weightSpecs,
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
      };
      fs.writeFileSync(
        path.join(dir, "model.json"),
        JSON.stringify(manifest),
      );
      const weightData = artifacts.weightData;
      if (weightData === undefined) {
        throw new Error("model produced no weight data");
      }
      fs.writeFileSync(
        path.join(dir, "weights.bin"),
        Buffer.from(joinBuffers(weightData)),
      );
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: "JSON" as const,
        },
      };
    }),
  );
  fs.writeFileSync(
    path.join(dir, "meta.json"),
    JSON.stringify(meta, null, 2) + "\n",
  );
}

export async function loadCheckpoint(dir: string): Promise<tf.LayersModel> {
  const manifest = JSON.parse(
    fs.readFileSync(path.join(dir, "model.json"), "utf-8"),
  );
  const raw = fs.readFileSync(path.join(dir, "weights.bin"));
  const weightData = raw.buffer.slice(
    raw.byteOffset,
    raw.byteOffset + raw.byteLength,
  );
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs: manifest.weightSpecs,
      weightData,
    }),
  );
}

export function readCheckpointMeta(dir: string): CheckpointMeta | null {
  const file = path.join(dir, "meta.json");
  if (!fs.existsSync(file)) {
    return null;
  }
  return JSON.parse(fs.readFileSync(file, "utf-8")) as CheckpointMeta;
}
