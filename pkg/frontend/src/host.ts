/**
 * Streaming inference: feed framed CIR messages in, get one (t, x, y)
 * estimate out per completed timestamp. Preprocessing follows the sidecar
 * contract that shipped with the training data, so served inputs match
 * what the model saw during training.
 */

import * as tf from "@tensorflow/tfjs";
import { Sidecar } from "./fingerprint";
import { infer, modelShape } from "./model";
import {
  buildImage,
  complexMagnitudes,
  FrameRow,
  InputImage,
} from "./preprocess";
import {
  scanCapture,
  StreamMessage,
  TimestampAssembler,
} from "./stream";

export interface Estimate {
  timestamp: number;
  x: number;
  y: number;
  /** How many image rows survived the mask threshold. */
  rowsKept: number;
}

export class InferenceHost {
  readonly assembler: TimestampAssembler;

  constructor(
    private readonly model: tf.LayersModel,
    private readonly sidecar: Sidecar,
  ) {
    const shape = modelShape(model);
    if (shape.rows !== sidecar.rows || shape.cols !== sidecar.columns) {
      throw new Error(
        `model wants ${shape.rows}x${shape.cols} images but the sidecar ` +
          `describes ${sidecar.rows}x${sidecar.columns}`,
      );
    }
    this.assembler = new TimestampAssembler(sidecar.row_order);
  }

  /** Build the preprocessed image for one completed timestamp. */
  imageFor(messages: StreamMessage[]): InputImage {
    const rows: FrameRow[] = messages.map((m) => ({
      ru: m.ru,
      antenna: m.antenna,
      mags: complexMagnitudes(m.payload),
    }));
    return buildImage(rows, {
      alphaNorm: this.sidecar.alpha_norm,
      gamma: this.sidecar.gamma,
      columns: this.sidecar.columns,
      rowOrder: this.sidecar.row_order,
    });
  }

  /**
   * Feed one message; returns an estimate when this message completes a
   * timestamp, null otherwise.
   */
  feed(message: StreamMessage): Estimate | null {
    const complete = this.assembler.push(message);
    if (complete === null) {
      return null;
    }
    const image = this.imageFor(complete.messages);
    const [x, y] = infer(this.model, image.values);
    let kept = 0;
    for (const bit of image.mask) kept += bit;
    return { timestamp: complete.timestamp, x, y, rowsKept: kept };
  }
}

export interface ServeReport {
  estimates: Estimate[];
  malformed: number;
  duplicates: number;
  stale: number;
  /** Timestamps that never saw all their antennas. */
  incomplete: number[];
}

/**
 * Replay a capture of concatenated framed messages through the host.
 * Damaged frames and duplicates are dropped and counted, never fatal.
 */
export function serveCapture(
  data: Uint8Array,
  model: tf.LayersModel,
  sidecar: Sidecar,
  onEstimate?: (estimate: Estimate) => void,
): ServeReport {
  const host = new InferenceHost(model, sidecar);
  const scan = scanCapture(data);
  const estimates: Estimate[] = [];
  for (const message of scan.messages) {
    const estimate = host.feed(message);
    if (estimate !== null) {
      estimates.push(estimate);
      onEstimate?.(estimate);
    }
  }
  return {
    estimates,
    malformed: scan.malformed,
    duplicates: host.assembler.duplicates,
    stale: host.assembler.stale,
    incomplete: host.assembler.incomplete,
  };
}
