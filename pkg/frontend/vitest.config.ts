import { defineConfig } from "vitest/config";

// The overfit test trains a real convolutional model, which can take a few
// minutes when the wasm backend is unavailable and everything runs on the
// plain cpu backend.
export default defineConfig({
  test: {
    environment: "node",
    testTimeout: 600_000,
    hookTimeout: 120_000,
  },
});
