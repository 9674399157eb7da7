// Backend selection: WASM (XNNPACK) when available, pure-JS otherwise.

import * as tf from "@tensorflow/tfjs";

export async function initBackend(log?: (line: string) => void): Promise<string> {
  try {
    const wasm = await import("@tensorflow/tfjs-backend-wasm");
    const url = new URL("../node_modules/@tensorflow/tfjs-backend-wasm/dist/", import.meta.url);
    wasm.setWasmPaths(url.pathname);
    if (await tf.setBackend("wasm")) {
      log?.("using wasm backend");
      return "wasm";
    }
  } catch {
    // fall through to the pure-JS backend
  }
  await tf.setBackend("cpu");
  log?.("using cpu backend");
  return "cpu";
}
