/**
 * Backend selection for tfjs. The wasm backend is much faster than the plain
 * cpu backend for the conv layers we train; fall back to cpu when it cannot
 * load (missing package, wasm instantiation failure).
 *
 * The stock wasm backend ships no Conv2DBackpropFilter kernel, which makes
 * conv layers untrainable there. The filter gradient is itself a convolution
 * (correlate the padded input with the output gradient, with batch and
 * channel axes swapped), so we register a composed kernel built from pad,
 * transpose and conv2d, which the backend does provide.
 */

import * as path from "path";
import * as tf from "@tensorflow/tfjs";

function registerWasmConvFilterGrad(): void {
  const registered = tf
    .getKernelsForBackend("wasm")
    .some((k) => k.kernelName === "Conv2DBackpropFilter");
  if (registered) {
    return;
  }
  tf.registerKernel({
    kernelName: "Conv2DBackpropFilter",
    backendName: "wasm",
    kernelFunc: ({ inputs, attrs }) => {
      const { x, dy } = inputs as { x: tf.Tensor4D; dy: tf.Tensor4D };
      const a = attrs as unknown as {
        strides: number | [number, number];
        pad: "valid" | "same" | number | tf.backend_util.ExplicitPadding;
        dataFormat: "NHWC" | "NCHW";
        dimRoundingMode?: "floor" | "round" | "ceil";
        filterShape: [number, number, number, number];
      };
      if (a.dataFormat !== "NHWC") {
        throw new Error(
          `conv filter gradient on wasm only handles NHWC, got ${a.dataFormat}`,
        );
      }
      const info = tf.backend_util.computeConv2DInfo(
        x.shape,
        a.filterShape,
        a.strides,
        1 /* dilations */,
        a.pad,
        a.dimRoundingMode,
      );
      const { top, bottom, left, right } = info.padInfo;
      return tf.tidy(() => {
        const padded = tf.pad(x, [
          [0, 0],
          [top, bottom],
          [left, right],
          [0, 0],
        ]);
        // channels become the batch, the batch becomes filter input channels
        const xT = tf.transpose(padded, [3, 1, 2, 0]) as tf.Tensor4D;
        const dyT = tf.transpose(dy, [1, 2, 0, 3]) as tf.Tensor4D;
        // a stride during the forward pass dilates the gradient correlation
        const grad = tf.conv2d(xT, dyT, 1, "valid", "NHWC", [
          info.strideHeight,
          info.strideWidth,
        ]);
        return tf.transpose(grad, [1, 2, 0, 3]);
      });
    },
  });
}

let chosen: string | null = null;

export async function ensureBackend(): Promise<string> {
  if (chosen !== null) {
    return chosen;
  }
  try {
    // eslint-disable-next-line @typescript-eslint/no-var-requires
    const wasm = require("@tensorflow/tfjs-backend-wasm");
    const wasmFile = require.resolve(
      "@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm",
    );
    wasm.setWasmPaths(path.dirname(wasmFile) + path.sep);
    if (await tf.setBackend("wasm")) {
      registerWasmConvFilterGrad();
      await tf.ready();
      chosen = "wasm";
      return chosen;
    }
  } catch {
    // fall through to cpu
  }
  await tf.setBackend("cpu");
  await tf.ready();
  chosen = "cpu";
  return chosen;
}
