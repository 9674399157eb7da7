// Serve a trained checkpoint over the guidance wire protocol.
//
//   node dist/serve.js --ckpt ckpt.json --manifest vocab.manifest --tcp 9731
//   node dist/serve.js --ckpt ckpt.json --manifest vocab.manifest --stdio
//
// One in-flight request per connection; multiple connections are served
// concurrently. All logging goes to stderr (stdout belongs to the protocol
// in stdio mode). Probabilities below 1e-6 are dropped from responses.

import { readFileSync } from "node:fs";
import { createServer } from "node:net";
import * as tf from "@tensorflow/tfjs";
import { initBackend } from "./backend.js";
import { intArg, parseArgs, requireArg } from "./args.js";
import { loadManifest } from "./manifest.js";
import { Checkpoint, GuidanceTransformer } from "./model.js";
import { createConnectionHandler, GuidanceRequest } from "./protocol.js";

const SPARSE_FLOOR = 1e-6;

export function probsFor(model: GuidanceTransformer, req: GuidanceRequest): Map<number, number> {
  const dist = model.nextTokenProbs(req.stateTokens, req.prefix);
  const out = new Map<number, number>();
  for (let tok = 0; tok < dist.length; tok++) {
    if (dist[tok] >= SPARSE_FLOOR) out.set(tok, dist[tok]);
  }
  return out;
}

export async function main(argv: string[]): Promise<void> {
  const args = parseArgs(argv);
  await initBackend((l) => console.error(`[backend] ${l}`));

  const manifest = loadManifest(requireArg(args, "manifest"));
  const ckpt = JSON.parse(readFileSync(requireArg(args, "ckpt"), "utf-8")) as Checkpoint;
  const model = GuidanceTransformer.fromCheckpoint(ckpt, manifest);
  const log = (line: string) => console.error(`[serve] ${line}`);

  const options = {
    manifestSha256: manifest.sha256,
    deterministic: true,
    nextTokenProbs: (req: GuidanceRequest) => probsFor(model, req),
    log,
  };

  if (args.has("stdio")) {
    const handler = createConnectionHandler(options);
    process.stdin.on("data", (data: Buffer) => {
      handler.feed(data, (b) => process.stdout.write(b), () => process.exit(0));
    });
    process.stdin.on("end", () => process.exit(0));
    log("serving on stdio");
    return;
  }

  const port = intArg(args, "tcp", 0);
  const server = createServer((socket) => {
    const handler = createConnectionHandler(options);
    socket.on("data", (data) => {
      handler.feed(data, (b) => socket.write(b), () => socket.end());
    });
    socket.on("error", (e) => log(`connection error: ${e.message}`));
  });
  server.listen(port, "127.0.0.1", () => {
    const address = server.address();
    const bound = typeof address === "object" && address ? address.port : port;
    log(`listening on 127.0.0.1:${bound}`);
    console.log(`PORT ${bound}`);
  });
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isMain) {
  main(process.argv.slice(2)).catch((e) => {
    console.error(`error: ${e instanceof Error ? e.message : e}`);
    process.exit(1);
  });
}
