#!/usr/bin/env node
/**
 * Command line entry points: train a model on a fingerprint batch, run it
 * over stored samples, or replay a raw capture as a live stream and print
 * one estimate per completed timestamp.
 */

import * as fs from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { ensureBackend } from "./backend";
import { loadCheckpoint, saveCheckpoint } from "./checkpoint";
import { parseSidecar, readFpsd } from "./fingerprint";
import { serveCapture } from "./host";
import { buildModel, inferBatch } from "./model";
import { LabeledSample, train } from "./train";

function loadSamples(fpsdPath: string): LabeledSample[] {
  const batch = readFpsd(new Uint8Array(fs.readFileSync(fpsdPath)));
  return batch.samples.map((s) => ({ values: s.values, label: s.label }));
}

async function cmdTrain(argv: {
  fpsd: string;
  sidecar: string;
  out: string;
  epochs: number;
  lr: number;
  seed: number;
}): Promise<void> {
  const backend = await ensureBackend();
  const sidecar = parseSidecar(fs.readFileSync(argv.sidecar, "utf-8"));
  const samples = loadSamples(argv.fpsd);
  console.log(
    `backend ${backend}, ${samples.length} samples, ` +
      `${sidecar.rows}x${sidecar.columns} inputs`,
  );
  const model = buildModel(
    { rows: sidecar.rows, cols: sidecar.columns },
    argv.seed,
  );
  const result = await train(model, samples, {
    epochs: argv.epochs,
    learningRate: argv.lr,
    log: (epoch, loss) =>
      console.log(`epoch ${epoch + 1}/${argv.epochs} loss ${loss.toExponential(4)}`),
  });
  await saveCheckpoint(model, argv.out, {
    rows: sidecar.rows,
    cols: sidecar.columns,
    epochs: argv.epochs,
    learningRate: argv.lr,
    seed: argv.seed,
    initialLoss: result.initialLoss,
    finalLoss: result.finalLoss,
    samples: samples.length,
  });
  console.log(
    `saved ${argv.out}: loss ${result.initialLoss.toExponential(4)} -> ` +
      `${result.finalLoss.toExponential(4)}`,
  );
}

async function cmdInfer(argv: {
  checkpoint: string;
  fpsd: string;
  index?: number;
}): Promise<void> {
  await ensureBackend();
  const model = await loadCheckpoint(argv.checkpoint);
  const batch = readFpsd(new Uint8Array(fs.readFileSync(argv.fpsd)));
  const samples =
    argv.index === undefined ? batch.samples : [batch.samples[argv.index]];
  if (samples.some((s) => s === undefined)) {
    throw new Error(`sample index ${argv.index} out of range`);
  }
  const estimates = inferBatch(
    model,
    samples.map((s) => s.values),
  );
  let sumSq = 0;
  samples.forEach((s, i) => {
    const [x, y] = estimates[i];
    const dx = x - s.label[0];
    const dy = y - s.label[1];
    sumSq += dx * dx + dy * dy;
    console.log(
      `t=${s.timestamp} est=(${x.toFixed(3)}, ${y.toFixed(3)}) ` +
        `truth=(${s.label[0].toFixed(3)}, ${s.label[1].toFixed(3)})`,
    );
  });
  console.log(`rmse ${Math.sqrt(sumSq / samples.length).toFixed(3)} m`);
}

async function cmdServe(argv: {
  capture: string;
  checkpoint: string;
  sidecar: string;
}): Promise<void> {
  await ensureBackend();
  const model = await loadCheckpoint(argv.checkpoint);
  const sidecar = parseSidecar(fs.readFileSync(argv.sidecar, "utf-8"));
  const data = new Uint8Array(fs.readFileSync(argv.capture));
  const report = serveCapture(data, model, sidecar, (e) =>
    console.log(
      `t=${e.timestamp} est=(${e.x.toFixed(3)}, ${e.y.toFixed(3)}) ` +
        `rows_kept=${e.rowsKept}`,
    ),
  );
  console.log(
    `${report.estimates.length} estimates, ${report.malformed} malformed, ` +
      `${report.duplicates} duplicates, ${report.incomplete.length} incomplete`,
  );
}

export async function main(args: string[]): Promise<void> {
  await yargs(args)
    .command(
      "train <fpsd> <sidecar>",
      "train a model on a fingerprint batch",
      (y) =>
        y
          .positional("fpsd", { type: "string", demandOption: true })
          .positional("sidecar", { type: "string", demandOption: true })
          .option("out", { type: "string", demandOption: true })
          .option("epochs", { type: "number", default: 200 })
          .option("lr", { type: "number", default: 1e-3 })
          .option("seed", { type: "number", default: 1 }),
      (argv) => cmdTrain(argv),
    )
    .command(
      "infer <checkpoint> <fpsd>",
      "run a checkpoint over stored samples",
      (y) =>
        y
          .positional("checkpoint", { type: "string", demandOption: true })
          .positional("fpsd", { type: "string", demandOption: true })
          .option("index", { type: "number" }),
      (argv) => cmdInfer(argv),
    )
    .command(
      "serve <capture> <checkpoint> <sidecar>",
      "replay a capture and print one estimate per timestamp",
      (y) =>
        y
          .positional("capture", { type: "string", demandOption: true })
          .positional("checkpoint", { type: "string", demandOption: true })
          .positional("sidecar", { type: "string", demandOption: true }),
      (argv) => cmdServe(argv),
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

if (require.main === module) {
  main(hideBin(process.argv)).catch((err) => {
    console.error(err instanceof Error ? err.message : err);
    process.exitCode = 1;
  });
}
