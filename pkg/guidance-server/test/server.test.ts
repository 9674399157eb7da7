// Serving invariants over a real (tiny, untrained) model: distribution
// validity and protocol conformance under fuzzed-but-valid requests.

import { execFileSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";
import { initBackend } from "../src/backend.js";
import { loadDataset, Sample } from "../src/dataset.js";
import { loadManifest, Manifest } from "../src/manifest.js";
import { GuidanceTransformer } from "../src/model.js";
import { createConnectionHandler, encodeFrame, FrameReader } from "../src/protocol.js";
import { probsFor } from "../src/serve.js";

let manifest: Manifest;
let samples: Sample[];
let model: GuidanceTransformer;

beforeAll(async () => {
  await initBackend();
  const dir = mkdtempSync(join(tmpdir(), "server-test-"));
  const manifestPath = join(dir, "vocab.manifest");
  const dataPath = join(dir, "data.jsonl");
  execFileSync("gridsynth", ["manifest", "--out", manifestPath]);
  execFileSync("gridsynth", [
    "gen-data", "--n", "6", "--seed", "4", "--tasks", "Train3",
    "--max-dim", "4", "--out", dataPath,
  ]);
  manifest = loadManifest(manifestPath);
  samples = loadDataset(dataPath, manifest);
  model = new GuidanceTransformer(manifest, {
    encoderLayers: 1,
    decoderLayers: 1,
    dModel: 32,
    ffDim: 64,
    heads: 4,
    maxSrcLen: Math.max(...samples.map((s) => s.stateTokens.length)),
    maxTgtLen: 14,
    seed: 0,
  });
}, 120_000);

function connect() {
  const written: Buffer[] = [];
  const handler = createConnectionHandler({
    manifestSha256: manifest.sha256,
    deterministic: true,
    nextTokenProbs: (req) => probsFor(model, req),
  });
  const reader = new FrameReader();
  return {
    send(obj: unknown) {
      handler.feed(encodeFrame(obj), (b) => written.push(b), () => {});
    },
    drain(): any[] {
      for (const chunk of written.splice(0)) reader.feed(chunk);
      const out: any[] = [];
      for (;;) {
        const f = reader.next();
        if (f === undefined) return out;
        out.push(f);
      }
    },
  };
}

describe("served distributions", () => {
  it("sum to one within 1e-4, sparse entries only", () => {
    const conn = connect();
    conn.send({ type: "hello", protocol: 1, manifest_sha256: manifest.sha256 });
    conn.send({ id: 1, state_tokens: samples[0].stateTokens, prefix: [] });
    const [, reply] = conn.drain();
    const probs = Object.values(reply.probs as Record<string, number>);
    const sum = probs.reduce((a, b) => a + b, 0);
    expect(Math.abs(sum - 1)).toBeLessThan(1e-4);
    for (const p of probs) expect(p).toBeGreaterThanOrEqual(1e-6);
    for (const key of Object.keys(reply.probs)) {
      expect(Number(key)).toBeLessThan(manifest.instructionSize);
    }
  });

  it("survives a fuzz of valid requests without crashing", { timeout: 120_000 }, () => {
    const conn = connect();
    conn.send({ type: "hello", protocol: 1, manifest_sha256: manifest.sha256 });
    let seed = 99;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    const n = 40;
    for (let i = 0; i < n; i++) {
      const base = samples[Math.floor(rand() * samples.length)];
      const prefixLen = Math.floor(rand() * 5);
      conn.send({
        id: i,
        state_tokens: base.stateTokens,
        prefix: Array.from({ length: prefixLen }, () =>
          Math.floor(rand() * manifest.instructionSize)
        ),
      });
    }
    const frames = conn.drain();
    expect(frames.length).toBe(n + 1);
    for (const frame of frames.slice(1)) {
      expect(frame.error ?? "").not.toMatch(/undefined is not|cannot read/i);
      if (frame.probs) {
        const sum = (Object.values(frame.probs) as number[]).reduce((a, b) => a + b, 0);
        expect(Math.abs(sum - 1)).toBeLessThan(1e-4);
      }
    }
  });
});
