import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    testTimeout: 180_000,
    hookTimeout: 60_000,
    // The end-to-end suite drives one shared live server; run files
    // sequentially so two servers never race for the same fixture.
    fileParallelism: false,
  },
});
