import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    // Same-origin with the e2e backend, like the production deployment
    // where the service hosts the client bundle.
    environmentOptions: {
      happyDOM: { url: "http://127.0.0.1:8977" },
    },
    include: ["tests/**/*.spec.ts"],
    testTimeout: 30000,
    hookTimeout: 60000,
  },
});
