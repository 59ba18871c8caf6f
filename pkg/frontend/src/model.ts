/**
 * The position-regression network and inference helpers. Input is a single
 * channel rows x cols magnitude image; output is a planar (x, y) estimate
 * in metres. Layer sizes follow the deployed configuration: two 3x3 same-
 * padded conv layers (32 then 64 filters), a 512 and a 128 unit dense layer,
 * all ReLU, and a linear 2-unit head.
 */

import * as tf from "@tensorflow/tfjs";

export interface ModelShape {
  rows: number;
  cols: number;
}

export const DEFAULT_SHAPE: ModelShape = { rows: 16, cols: 100 };

/**
 * Build the network with seeded initializers, so two builds with the same
 * seed start from identical weights.
 */
export function buildModel(shape: ModelShape = DEFAULT_SHAPE, seed = 1): tf.LayersModel {
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [shape.rows, shape.cols, 1],
      filters: 32,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
    }),
  );
  model.add(
    tf.layers.conv2d({
      filters: 64,
      kernelSize: 3,
      padding: "same",
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
    }),
  );
  model.add(tf.layers.flatten());
  model.add(
    tf.layers.dense({
      units: 512,
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
    }),
  );
  model.add(
    tf.layers.dense({
      units: 128,
      activation: "relu",
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 3 }),
    }),
  );
  model.add(
    tf.layers.dense({
      units: 2,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 4 }),
    }),
  );
  return model;
}

/**
 * Closed-form parameter count for the architecture above, kept next to the
 * builder so a shape change must touch both.
 */
export function expectedParamCount(shape: ModelShape = DEFAULT_SHAPE): number {
  const conv1 = 3 * 3 * 1 * 32 + 32;
  const conv2 = 3 * 3 * 32 * 64 + 64;
  const flat = 64 * shape.rows * shape.cols;
  const dense1 = flat * 512 + 512;
  const dense2 = 512 * 128 + 128;
  const head = 128 * 2 + 2;
  return conv1 + conv2 + dense1 + dense2 + head;
}

/** Shape of the image the model was built for, read back from its input. */
export function modelShape(model: tf.LayersModel): ModelShape {
  const s = model.inputs[0].shape;
  if (s.length !== 4 || s[1] == null || s[2] == null) {
    throw new Error(`model input shape ${JSON.stringify(s)} is not an image`);
  }
  return { rows: s[1], cols: s[2] };
}

/** Run a batch of flattened images through the model; returns [x, y] rows. */
export function inferBatch(
  model: tf.LayersModel,
  images: ReadonlyArray<Float64Array>,
): Array<[number, number]> {
  const { rows, cols } = modelShape(model);
  for (const img of images) {
    if (img.length !== rows * cols) {
      throw new Error(
        `image has ${img.length} values, model wants ${rows * cols}`,
      );
    }
  }
  const flat = new Float32Array(images.length * rows * cols);
  images.forEach((img, i) => flat.set(img, i * rows * cols));
  const out = tf.tidy(() => {
    const input = tf.tensor4d(flat, [images.length, rows, cols, 1]);
    return (model.predict(input) as tf.Tensor).dataSync();
  });
  const result: Array<[number, number]> = [];
  for (let i = 0; i < images.length; i++) {
    result.push([out[2 * i], out[2 * i + 1]]);
  }
  return result;
}

/** Run one flattened image through the model. */
export function infer(
  model: tf.LayersModel,
  image: Float64Array,
): [number, number] {
  return inferBatch(model, [image])[0];
}
