// JSONL teacher-forcing dataset: one line per ground-truth instruction
// step, {"task", "state_tokens", "target_tokens"}.

import { readFileSync } from "node:fs";
import { Manifest } from "./manifest.js";

export interface Sample {
  task: string;
  stateTokens: number[];
  targetTokens: number[];
}

export class DatasetError extends Error {}

export function parseDataset(text: string, manifest: Manifest): Sample[] {
  const samples: Sample[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let row: unknown;
    try {
      row = JSON.parse(line);
    } catch {
      throw new DatasetError(`line ${i + 1}: not valid JSON`);
    }
    const obj = row as Record<string, unknown>;
    const state = obj.state_tokens;
    const target = obj.target_tokens;
    if (!Array.isArray(state) || !Array.isArray(target) || target.length === 0) {
      throw new DatasetError(`line ${i + 1}: expected state_tokens and target_tokens lists`);
    }
    for (const t of state as unknown[]) {
      if (typeof t !== "number" || !Number.isInteger(t) || t < 0 || t >= manifest.size) {
        throw new DatasetError(`line ${i + 1}: state token ${t} outside the manifest vocabulary`);
      }
    }
    for (const t of target as unknown[]) {
      if (typeof t !== "number" || !Number.isInteger(t) || t < 0 || t >= manifest.instructionSize) {
        throw new DatasetError(`line ${i + 1}: target token ${t} outside the instruction vocabulary`);
      }
    }
    if (target[target.length - 1] !== manifest.eos) {
      throw new DatasetError(`line ${i + 1}: target does not end with EOS`);
    }
    samples.push({
      task: String(obj.task ?? ""),
      stateTokens: state as number[],
      targetTokens: target as number[],
    });
  }
  if (samples.length === 0) {
    throw new DatasetError("dataset is empty");
  }
  return samples;
}

export function loadDataset(path: string, manifest: Manifest): Sample[] {
  return parseDataset(readFileSync(path, "utf-8"), manifest);
}
