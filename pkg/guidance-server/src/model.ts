// Encoder-decoder transformer over the shared token vocabulary.
//
// The encoder reads a serialized program state (input grids, intermediate
// values, targets); the decoder emits instruction-step tokens. Sizes come
// from the vocabulary manifest, never from constants; everything else
// (layers, width, heads) scales down via config for desk-scale training.

import * as tf from "@tensorflow/tfjs";
import { Manifest } from "./manifest.js";
import { Sample } from "./dataset.js";

export interface ModelConfig {
  encoderLayers: number;
  decoderLayers: number;
  dModel: number;
  ffDim: number;
  heads: number;
  maxSrcLen: number;
  maxTgtLen: number;
  seed: number;
}

export const DEFAULT_CONFIG: Omit<ModelConfig, "maxSrcLen" | "maxTgtLen" | "seed"> = {
  encoderLayers: 4,
  decoderLayers: 4,
  dModel: 256,
  ffDim: 1024,
  heads: 16,
};

export interface Checkpoint {
  version: 1;
  manifestSha256: string;
  config: ModelConfig;
  weights: Record<string, { shape: number[]; data: number[] }>;
  lossHistory: number[];
}

// Deterministic float source for weight init (mulberry32).
function rngFrom(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function seededUniform(rng: () => number, shape: number[], scale: number): tf.Tensor {
  const n = shape.reduce((a, b) => a * b, 1);
  const data = new Float32Array(n);
  for (let i = 0; i < n; i++) data[i] = (rng() * 2 - 1) * scale;
  return tf.tensor(data, shape);
}

let modelCounter = 0;

export class GuidanceTransformer {
  readonly manifest: Manifest;
  readonly config: ModelConfig;
  readonly weights = new Map<string, tf.Variable>();
  private readonly uid = `m${modelCounter++}`;
  lossHistory: number[] = [];

  // decoder-input specials live past the instruction vocabulary
  readonly startId: number;
  readonly tgtPadId: number;
  readonly srcPadId: number;

  private encoderCache = new Map<string, { enc: tf.Tensor; mask: tf.Tensor }>();
  private cacheOrder: string[] = [];

  constructor(manifest: Manifest, config: ModelConfig) {
    this.manifest = manifest;
    this.config = config;
    this.startId = manifest.instructionSize;
    this.tgtPadId = manifest.instructionSize + 1;
    this.srcPadId = manifest.size;
    if (config.dModel % config.heads !== 0) {
      throw new Error("dModel must be divisible by heads");
    }
    this.initWeights();
  }

  private addWeight(name: string, tensor: tf.Tensor): void {
    // tfjs registers variable names globally; scope them per instance
    this.weights.set(name, tf.variable(tensor, true, `${this.uid}/${name}`));
    tensor.dispose();
  }

  private initWeights(): void {
    const { dModel, ffDim, encoderLayers, decoderLayers, maxSrcLen, maxTgtLen, seed } = this.config;
    const rng = rngFrom(seed * 2654435761 + 1);
    const init = (shape: number[]) => {
      const fanIn = shape.length > 1 ? shape[0] : shape[0];
      const fanOut = shape.length > 1 ? shape[shape.length - 1] : shape[0];
      return seededUniform(rng, shape, Math.sqrt(6 / (fanIn + fanOut)));
    };
    this.addWeight("src_emb", init([this.srcPadId + 1, dModel]));
    this.addWeight("tgt_emb", init([this.tgtPadId + 1, dModel]));
    this.addWeight("src_pos", init([maxSrcLen, dModel]));
    this.addWeight("tgt_pos", init([maxTgtLen + 1, dModel]));
    const block = (prefix: string, cross: boolean) => {
      for (const name of ["q", "k", "v", "o"]) {
        this.addWeight(`${prefix}.attn.${name}`, init([dModel, dModel]));
      }
      if (cross) {
        for (const name of ["q", "k", "v", "o"]) {
          this.addWeight(`${prefix}.cross.${name}`, init([dModel, dModel]));
        }
        this.addWeight(`${prefix}.ln3.g`, tf.ones([dModel]));
        this.addWeight(`${prefix}.ln3.b`, tf.zeros([dModel]));
      }
      this.addWeight(`${prefix}.ff.w1`, init([dModel, ffDim]));
      this.addWeight(`${prefix}.ff.b1`, tf.zeros([ffDim]));
      this.addWeight(`${prefix}.ff.w2`, init([ffDim, dModel]));
      this.addWeight(`${prefix}.ff.b2`, tf.zeros([dModel]));
      this.addWeight(`${prefix}.ln1.g`, tf.ones([dModel]));
      this.addWeight(`${prefix}.ln1.b`, tf.zeros([dModel]));
      this.addWeight(`${prefix}.ln2.g`, tf.ones([dModel]));
      this.addWeight(`${prefix}.ln2.b`, tf.zeros([dModel]));
    };
    for (let i = 0; i < encoderLayers; i++) block(`enc${i}`, false);
    for (let i = 0; i < decoderLayers; i++) block(`dec${i}`, true);
    this.addWeight("proj.w", init([dModel, this.manifest.instructionSize]));
    this.addWeight("proj.b", tf.zeros([this.manifest.instructionSize]));
  }

  private w(name: string): tf.Variable {
    const v = this.weights.get(name);
    if (!v) throw new Error(`missing weight ${name}`);
    return v;
  }

  /** Embedding lookup as one-hot matmul: every backend can differentiate it. */
  private embed(ids: tf.Tensor, table: tf.Variable): tf.Tensor {
    const [b, t] = ids.shape as number[];
    const rows = table.shape[0] as number;
    const d = table.shape[1] as number;
    return tf
      .oneHot(ids.cast("int32"), rows)
      .reshape([b * t, rows])
      .matMul(table)
      .reshape([b, t, d]);
  }

  /** [B,T,din] x [din,dout]: flattened so tfjs can take gradients. */
  private dense(x: tf.Tensor, w: tf.Variable): tf.Tensor {
    const [b, t, din] = x.shape as number[];
    const dout = w.shape[1] as number;
    return x.reshape([b * t, din]).matMul(w).reshape([b, t, dout]);
  }

  private layerNorm(x: tf.Tensor, prefix: string): tf.Tensor {
    const mean = x.mean(-1, true);
    const centered = x.sub(mean);
    const variance = centered.square().mean(-1, true);
    return centered
      .div(variance.add(1e-5).sqrt())
      .mul(this.w(`${prefix}.g`))
      .add(this.w(`${prefix}.b`));
  }

  /** Multi-head attention; mask holds 0 (keep) or -1e9 (drop) addends. */
  private attention(
    queries: tf.Tensor,
    keys: tf.Tensor,
    values: tf.Tensor,
    mask: tf.Tensor | null,
    prefix: string
  ): tf.Tensor {
    const { heads, dModel } = this.config;
    const dHead = dModel / heads;
    const [b, tq] = queries.shape as number[];
    const tk = keys.shape[1] as number;
    const split = (x: tf.Tensor, t: number, name: string) =>
      this.dense(x, this.w(`${prefix}.${name}`)).reshape([b, t, heads, dHead]).transpose([0, 2, 1, 3]);
    const q = split(queries, tq, "q");
    const k = split(keys, tk, "k");
    const v = split(values, tk, "v");
    let scores = q.matMul(k, false, true).div(Math.sqrt(dHead));
    if (mask) scores = scores.add(mask);
    const merged = tf.softmax(scores).matMul(v).transpose([0, 2, 1, 3]).reshape([b, tq, dModel]);
    return this.dense(merged, this.w(`${prefix}.o`));
  }

  private feedForward(x: tf.Tensor, prefix: string): tf.Tensor {
    const hidden = this.dense(x, this.w(`${prefix}.w1`)).add(this.w(`${prefix}.b1`)).relu();
    return this.dense(hidden, this.w(`${prefix}.w2`)).add(this.w(`${prefix}.b2`));
  }

  /** [B,1,1,Ts] additive mask from padded source ids. */
  private srcPadMask(src: tf.Tensor): tf.Tensor {
    return src.equal(this.srcPadId).cast("float32").mul(-1e9).expandDims(1).expandDims(1);
  }

  encode(src: tf.Tensor): { enc: tf.Tensor; mask: tf.Tensor } {
    const mask = this.srcPadMask(src);
    const t = src.shape[1] as number;
    let x = this.embed(src, this.w("src_emb"))
      .mul(Math.sqrt(this.config.dModel))
      .add(this.w("src_pos").slice([0, 0], [t, this.config.dModel]));
    for (let i = 0; i < this.config.encoderLayers; i++) {
      x = this.layerNorm(x.add(this.attention(x, x, x, mask, `enc${i}.attn`)), `enc${i}.ln1`);
      x = this.layerNorm(x.add(this.feedForward(x, `enc${i}.ff`)), `enc${i}.ln2`);
    }
    return { enc: x, mask };
  }

  /** Decoder logits [B,Tt,V]; tgtIn holds START/token ids with PAD tails. */
  decode(tgtIn: tf.Tensor, enc: tf.Tensor, srcMask: tf.Tensor): tf.Tensor {
    const t = tgtIn.shape[1] as number;
    const causal = tf
      .sub(1, tf.linalg.bandPart(tf.ones([t, t]), -1, 0))
      .mul(-1e9)
      .expandDims(0)
      .expandDims(0);
    const padMask = tgtIn.equal(this.tgtPadId).cast("float32").mul(-1e9).expandDims(1).expandDims(1);
    const mask = causal.add(padMask);
    let x = this.embed(tgtIn, this.w("tgt_emb"))
      .mul(Math.sqrt(this.config.dModel))
      .add(this.w("tgt_pos").slice([0, 0], [t, this.config.dModel]));
    for (let i = 0; i < this.config.decoderLayers; i++) {
      x = this.layerNorm(x.add(this.attention(x, x, x, mask, `dec${i}.attn`)), `dec${i}.ln1`);
      x = this.layerNorm(x.add(this.attention(x, enc, enc, srcMask, `dec${i}.cross`)), `dec${i}.ln3`);
      x = this.layerNorm(x.add(this.feedForward(x, `dec${i}.ff`)), `dec${i}.ln2`);
    }
    return this.dense(x, this.w("proj.w")).add(this.w("proj.b"));
  }

  padSrc(tokens: number[]): number[] {
    const max = this.config.maxSrcLen;
    // keep the tail: the freshest slots and the final target block live there
    const kept = tokens.length > max ? tokens.slice(tokens.length - max) : tokens;
    return kept.concat(Array(max - kept.length).fill(this.srcPadId));
  }

  /** (decoder input, label row) for teacher forcing; label PADs are masked. */
  tgtRows(target: number[]): { input: number[]; label: number[] } {
    const max = this.config.maxTgtLen;
    if (target.length > max) {
      throw new Error(`target of ${target.length} tokens exceeds maxTgtLen=${max}`);
    }
    const input = [this.startId, ...target.slice(0, -1)];
    const pad = max - target.length;
    return {
      input: input.concat(Array(pad).fill(this.tgtPadId)),
      label: target.concat(Array(pad).fill(this.tgtPadId)),
    };
  }

  /** Mean masked cross-entropy over one batch. */
  batchLoss(samples: Sample[]): tf.Scalar {
    return tf.tidy(() => {
      const src = tf.tensor2d(samples.map((s) => this.padSrc(s.stateTokens)), undefined, "int32");
      const rows = samples.map((s) => this.tgtRows(s.targetTokens));
      const tgtIn = tf.tensor2d(rows.map((r) => r.input), undefined, "int32");
      const labels = tf.tensor2d(rows.map((r) => r.label), undefined, "int32");
      const { enc, mask } = this.encode(src);
      const logits = this.decode(tgtIn, enc, mask);
      const logProbs = tf.logSoftmax(logits);
      const keep = labels.notEqual(this.tgtPadId).cast("float32");
      const safeLabels = labels.mul(keep.cast("int32"));
      const oneHot = tf.oneHot(safeLabels, this.manifest.instructionSize);
      const picked = logProbs.mul(oneHot).sum(-1).mul(keep);
      return picked.sum().div(keep.sum()).neg().asScalar();
    });
  }

  trainEpoch(samples: Sample[], batchSize: number, optimizer: tf.Optimizer, epochSeed: number): number {
    const order = samples.map((_, i) => i);
    const rng = rngFrom(epochSeed);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let total = 0;
    let batches = 0;
    const varList = [...this.weights.values()];
    for (let at = 0; at < order.length; at += batchSize) {
      const batch = order.slice(at, at + batchSize).map((i) => samples[i]);
      const cost = optimizer.minimize(() => this.batchLoss(batch), true, varList);
      total += cost!.dataSync()[0];
      cost!.dispose();
      batches += 1;
    }
    return total / batches;
  }

  private cachedEncode(stateTokens: number[]): { enc: tf.Tensor; mask: tf.Tensor } {
    const key = stateTokens.join(",");
    const hit = this.encoderCache.get(key);
    if (hit) return hit;
    const out = tf.tidy(() => {
      const src = tf.tensor2d([this.padSrc(stateTokens)], undefined, "int32");
      const { enc, mask } = this.encode(src);
      return { enc: tf.keep(enc), mask: tf.keep(mask) };
    });
    this.encoderCache.set(key, out);
    this.cacheOrder.push(key);
    if (this.cacheOrder.length > 128) {
      const evict = this.cacheOrder.shift()!;
      const old = this.encoderCache.get(evict);
      if (old) {
        old.enc.dispose();
        old.mask.dispose();
        this.encoderCache.delete(evict);
      }
    }
    return out;
  }

  /** Softmax over instruction tokens after the given prefix. */
  nextTokenProbs(stateTokens: number[], prefix: number[]): Float32Array {
    if (prefix.length >= this.config.maxTgtLen) {
      throw new Error(`prefix of ${prefix.length} tokens exceeds maxTgtLen`);
    }
    const { enc, mask } = this.cachedEncode(stateTokens);
    return tf.tidy(() => {
      const tgtIn = tf.tensor2d([[this.startId, ...prefix]], undefined, "int32");
      const logits = this.decode(tgtIn, enc, mask);
      const last = logits.slice([0, prefix.length, 0], [1, 1, this.manifest.instructionSize]);
      return tf.softmax(last).dataSync() as Float32Array;
    });
  }

  /** Greedy decode until EOS (or the length cap). */
  greedyDecode(stateTokens: number[]): number[] {
    const out: number[] = [];
    while (out.length < this.config.maxTgtLen) {
      const probs = this.nextTokenProbs(stateTokens, out);
      let best = 0;
      for (let t = 1; t < probs.length; t++) {
        if (probs[t] > probs[best]) best = t;
      }
      out.push(best);
      if (best === this.manifest.eos) break;
    }
    return out;
  }

  toCheckpoint(): Checkpoint {
    const weights: Checkpoint["weights"] = {};
    for (const [name, v] of this.weights) {
      weights[name] = { shape: v.shape.slice(), data: Array.from(v.dataSync()) };
    }
    return {
      version: 1,
      manifestSha256: this.manifest.sha256,
      config: { ...this.config },
      weights,
      lossHistory: this.lossHistory.slice(),
    };
  }

  static fromCheckpoint(ckpt: Checkpoint, manifest: Manifest): GuidanceTransformer {
    if (ckpt.manifestSha256 !== manifest.sha256) {
      throw new Error(
        "checkpoint was trained against a different vocabulary manifest " +
          `(${ckpt.manifestSha256.slice(0, 12)} != ${manifest.sha256.slice(0, 12)})`
      );
    }
    const model = new GuidanceTransformer(manifest, ckpt.config);
    for (const [name, v] of model.weights) {
      const stored = ckpt.weights[name];
      if (!stored) throw new Error(`checkpoint is missing weight ${name}`);
      v.assign(tf.tensor(stored.data, stored.shape as number[]));
    }
    model.lossHistory = ckpt.lossHistory.slice();
    return model;
  }
}
