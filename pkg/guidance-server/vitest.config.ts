import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the model and e2e suites are CPU-bound; parallel files just thrash
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 1_500_000,
  },
});
