// Greedy-decode accuracy of a checkpoint against a dataset: what fraction
// of instruction steps are reconstructed token-for-token (and the
// token-level rate for diagnosis).
//
//   node dist/evaluate.js --ckpt ckpt.json --manifest vocab.manifest --data data.jsonl

import { readFileSync } from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "./backend.js";
import { parseArgs, requireArg } from "./args.js";
import { loadDataset } from "./dataset.js";
import { loadManifest } from "./manifest.js";
import { Checkpoint, GuidanceTransformer } from "./model.js";

export interface Accuracy {
  steps: number;
  exactSteps: number;
  tokens: number;
  exactTokens: number;
}

export function evaluate(model: GuidanceTransformer, samples: { stateTokens: number[]; targetTokens: number[] }[]): Accuracy {
  const acc: Accuracy = { steps: 0, exactSteps: 0, tokens: 0, exactTokens: 0 };
  for (const sample of samples) {
    const decoded = model.greedyDecode(sample.stateTokens);
    acc.steps += 1;
    if (
      decoded.length === sample.targetTokens.length &&
      decoded.every((t, i) => t === sample.targetTokens[i])
    ) {
      acc.exactSteps += 1;
    }
    for (let i = 0; i < sample.targetTokens.length; i++) {
      acc.tokens += 1;
      if (decoded[i] === sample.targetTokens[i]) acc.exactTokens += 1;
    }
  }
  return acc;
}

export async function main(argv: string[]): Promise<void> {
  const args = parseArgs(argv);
  await initBackend((l) => console.error(`[backend] ${l}`));
  const manifest = loadManifest(requireArg(args, "manifest"));
  const ckpt = JSON.parse(readFileSync(requireArg(args, "ckpt"), "utf-8")) as Checkpoint;
  const model = GuidanceTransformer.fromCheckpoint(ckpt, manifest);
  const samples = loadDataset(requireArg(args, "data"), manifest).filter(
    (s) => s.stateTokens.length <= model.config.maxSrcLen
  );
  const acc = evaluate(model, samples);
  const stepRate = acc.exactSteps / acc.steps;
  const tokenRate = acc.exactTokens / acc.tokens;
  console.log(
    `steps ${acc.exactSteps}/${acc.steps} (${(100 * stepRate).toFixed(1)}%) ` +
      `tokens ${acc.exactTokens}/${acc.tokens} (${(100 * tokenRate).toFixed(1)}%)`
  );
  console.log(JSON.stringify({ step_accuracy: stepRate, token_accuracy: tokenRate }));
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  main(process.argv.slice(2)).catch((e) => {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    process.exit(1);
  });
}
