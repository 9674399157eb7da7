// Teacher-forcing training over an emitted JSONL dataset.
//
//   node dist/train.js --data data.jsonl --manifest vocab.manifest \
//       --out ckpt.json --epochs 40 [--resume ckpt.json] [--d-model 64 ...]

import { readFileSync, writeFileSync } from "node:fs";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "./backend.js";
import { floatArg, intArg, parseArgs, requireArg } from "./args.js";
import { loadDataset } from "./dataset.js";
import { loadManifest } from "./manifest.js";
import { Checkpoint, DEFAULT_CONFIG, GuidanceTransformer, ModelConfig } from "./model.js";

export async function main(argv: string[]): Promise<void> {
  const args = parseArgs(argv);
  await initBackend((l) => console.error(`[backend] ${l}`));

  const manifest = loadManifest(requireArg(args, "manifest"));
  const samples = loadDataset(requireArg(args, "data"), manifest);
  const outPath = requireArg(args, "out");
  const epochs = intArg(args, "epochs", 30);
  const batchSize = intArg(args, "batch", 16);
  const lr = floatArg(args, "lr", 1e-3);
  const seed = intArg(args, "seed", 0);

  const maxSrcNeeded = Math.max(...samples.map((s) => s.stateTokens.length));
  const maxTgtNeeded = Math.max(...samples.map((s) => s.targetTokens.length));

  let model: GuidanceTransformer;
  const resume = args.get("resume");
  if (resume) {
    const ckpt = JSON.parse(readFileSync(resume, "utf-8")) as Checkpoint;
    model = GuidanceTransformer.fromCheckpoint(ckpt, manifest);
    console.log(`resumed from ${resume} at epoch ${model.lossHistory.length}`);
  } else {
    const config: ModelConfig = {
      encoderLayers: intArg(args, "encoder-layers", DEFAULT_CONFIG.encoderLayers),
      decoderLayers: intArg(args, "decoder-layers", DEFAULT_CONFIG.decoderLayers),
      dModel: intArg(args, "d-model", DEFAULT_CONFIG.dModel),
      ffDim: intArg(args, "ff-dim", DEFAULT_CONFIG.ffDim),
      heads: intArg(args, "heads", DEFAULT_CONFIG.heads),
      maxSrcLen: intArg(args, "max-src", maxSrcNeeded),
      maxTgtLen: intArg(args, "max-tgt", maxTgtNeeded),
      seed,
    };
    model = new GuidanceTransformer(manifest, config);
  }
  if (model.config.maxTgtLen < maxTgtNeeded) {
    throw new Error(`dataset needs maxTgtLen >= ${maxTgtNeeded}`);
  }

  const usable = samples.filter((s) => s.stateTokens.length <= model.config.maxSrcLen);
  if (usable.length < samples.length) {
    console.log(`dropping ${samples.length - usable.length} samples over maxSrcLen=${model.config.maxSrcLen}`);
  }
  console.log(
    `training on ${usable.length} samples, vocab ${manifest.size}/${manifest.instructionSize}, ` +
      `src<=${model.config.maxSrcLen}, tgt<=${model.config.maxTgtLen}, ` +
      `d=${model.config.dModel} h=${model.config.heads} enc=${model.config.encoderLayers} dec=${model.config.decoderLayers}`
  );

  const optimizer = tf.train.adam(lr);
  const started = Date.now();
  for (let epoch = 0; epoch < epochs; epoch++) {
    const loss = model.trainEpoch(usable, batchSize, optimizer, seed * 1000003 + model.lossHistory.length);
    model.lossHistory.push(loss);
    console.log(
      `epoch ${model.lossHistory.length}: loss ${loss.toFixed(4)} (${((Date.now() - started) / 1000).toFixed(1)}s)`
    );
  }

  writeFileSync(outPath, JSON.stringify(model.toCheckpoint()));
  console.log(`checkpoint written to ${outPath} (manifest ${manifest.sha256.slice(0, 12)})`);
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  main(process.argv.slice(2)).catch((e) => {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    process.exit(1);
  });
}
