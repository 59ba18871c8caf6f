import { beforeAll, describe, expect, it } from "vitest";
import { ensureBackend } from "../src/backend";
import { buildModel, DEFAULT_SHAPE, inferBatch } from "../src/model";
import { LabeledSample, train } from "../src/train";

/**
 * The memorization check: the full-size network must drive its training
 * MSE below 1% of the starting value on a 50-sample set. This is the one
 * genuinely slow test in the suite (a couple hundred megabytes of weights,
 * tens of full-batch epochs), so it early-stops as soon as the target is
 * cleared and gets a generous timeout.
 */

beforeAll(async () => {
  await ensureBackend();
});

function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 4294967296;
  };
}

/**
 * Fifty synthetic inputs shaped like real preprocessed captures: each row a
 * decaying early-delay pulse, normalized to about unit peak, with a couple
 * of rows zeroed as if masked. Labels cover a 50 x 10 m hall.
 */
function syntheticSamples(): LabeledSample[] {
  const rand = lcg(2026);
  const { rows, cols } = DEFAULT_SHAPE;
  const samples: LabeledSample[] = [];
  for (let i = 0; i < 50; i++) {
    const values = new Float64Array(rows * cols);
    for (let r = 0; r < rows; r++) {
      if (rand() < 0.12) continue; // masked row
      const peakCol = Math.floor(rand() * 12);
      const height = 0.45 + 0.55 * rand();
      for (let c2 = 0; c2 < cols; c2++) {
        const d = c2 - peakCol;
        if (d >= 0) {
          values[r * cols + c2] = height * Math.exp(-d / (2 + 6 * rand()));
        }
      }
      values[r * cols + peakCol] = height;
    }
    samples.push({
      values,
      label: [2 + 46 * rand(), 1 + 8 * rand()],
    });
  }
  return samples;
}

describe("full-size overfit run", () => {
  it(
    "reduces training MSE by at least 99% on 50 samples",
    async () => {
      const samples = syntheticSamples();
      const model = buildModel(DEFAULT_SHAPE, 3);

      // rough scale of the loss before any training: the freshly
      // initialized net predicts near zero, so the labels dominate
      let approxInitial = 0;
      for (const s of samples) {
        approxInitial += s.label[0] ** 2 + s.label[1] ** 2;
      }
      approxInitial /= 2 * samples.length;

      const result = await train(model, samples, {
        epochs: 200,
        stopWhen: (loss) => loss <= 0.008 * approxInitial,
        log: (epoch, loss) =>
          process.stdout.write(
            `  epoch ${epoch + 1} loss ${loss.toExponential(3)}\n`,
          ),
      });

      const ratio = result.finalLoss / result.initialLoss;
      process.stdout.write(
        `  ${result.losses.length} epochs, mse ${result.initialLoss.toFixed(
          1,
        )} -> ${result.finalLoss.toFixed(3)} (ratio ${ratio.toExponential(2)})\n`,
      );
      expect(result.losses.length).toBeLessThanOrEqual(200);
      expect(ratio).toBeLessThanOrEqual(0.01);

      // the inference path must agree with the training-time loss
      const predictions = inferBatch(
        model,
        samples.map((s) => s.values),
      );
      let mse = 0;
      for (let i = 0; i < samples.length; i++) {
        const [x, y] = predictions[i];
        mse += (x - samples[i].label[0]) ** 2 + (y - samples[i].label[1]) ** 2;
      }
      mse /= 2 * samples.length;
      expect(Math.abs(mse - result.finalLoss)).toBeLessThanOrEqual(
        1e-6 + 1e-3 * result.finalLoss,
      );
      model.dispose();
    },
    3_600_000,
  );
});
