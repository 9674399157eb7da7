// Vocabulary manifest: the token-id contract shared with the engine.
// The SHA-256 of the manifest text is exchanged during the protocol
// handshake; a mismatch means token ids may disagree and must abort.

import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";

export interface Manifest {
  primNames: string[];
  primArities: Map<string, number>;
  refOnly: Set<string>;
  attributes: string[];
  maxRefs: number;
  refBase: number;
  /** ids below this bound are instruction tokens (the decoder's alphabet) */
  instructionSize: number;
  /** total vocabulary including state-serialization tokens */
  size: number;
  sep: number;
  argsep: number;
  eos: number;
  text: string;
  sha256: string;
}

const HEADER = "gridsynth-vocab v1";
const N_INT_TOKENS = 10;
const N_ATTRIBUTES = 9;
const N_CONTROL = 3;
const N_STATE_TOKENS = 11;

export class ManifestError extends Error {}

export function parseManifest(text: string): Manifest {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length === 0 || lines[0].trim() !== HEADER) {
    throw new ManifestError(`expected manifest header "${HEADER}"`);
  }
  const fields = new Map<string, string>();
  for (const line of lines.slice(1)) {
    const colon = line.indexOf(":");
    if (colon < 0) throw new ManifestError(`bad manifest line: ${line}`);
    fields.set(line.slice(0, colon).trim(), line.slice(colon + 1).trim());
  }
  const primField = fields.get("primitives");
  const maxRefsField = fields.get("max_refs");
  if (!primField || !maxRefsField) {
    throw new ManifestError("manifest is missing primitives or max_refs");
  }
  const primNames: string[] = [];
  const primArities = new Map<string, number>();
  for (const entry of primField.split(/\s+/)) {
    const [name, arity] = entry.split("/");
    const n = Number(arity);
    if (!name || !Number.isInteger(n)) {
      throw new ManifestError(`bad primitive entry: ${entry}`);
    }
    primNames.push(name);
    primArities.set(name, n);
  }
  const attributes = (fields.get("attributes") ?? "").split(/\s+/).filter(Boolean);
  if (attributes.length !== N_ATTRIBUTES) {
    throw new ManifestError(`expected ${N_ATTRIBUTES} attributes, got ${attributes.length}`);
  }
  const maxRefs = Number(maxRefsField);
  if (!Number.isInteger(maxRefs) || maxRefs < 1) {
    throw new ManifestError(`bad max_refs: ${maxRefsField}`);
  }

  const attrBase = N_INT_TOKENS + primNames.length;
  const sep = attrBase + N_ATTRIBUTES;
  const refBase = sep + N_CONTROL;
  const instructionSize = refBase + maxRefs;
  const size = instructionSize + N_STATE_TOKENS;

  const declaredRefBase = fields.get("ref_base");
  if (declaredRefBase !== undefined && Number(declaredRefBase) !== refBase) {
    throw new ManifestError(`ref_base ${declaredRefBase} does not match layout ${refBase}`);
  }
  const declaredSize = fields.get("size");
  if (declaredSize !== undefined && Number(declaredSize) !== size) {
    throw new ManifestError(`size ${declaredSize} does not match layout ${size}`);
  }

  return {
    primNames,
    primArities,
    refOnly: new Set((fields.get("ref_only") ?? "").split(/\s+/).filter(Boolean)),
    attributes,
    maxRefs,
    refBase,
    instructionSize,
    size,
    sep,
    argsep: sep + 1,
    eos: sep + 2,
    text,
    sha256: createHash("sha256").update(text, "utf-8").digest("hex"),
  };
}

export function loadManifest(path: string): Manifest {
  return parseManifest(readFileSync(path, "utf-8"));
}
