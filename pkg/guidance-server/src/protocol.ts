// Length-delimited JSON framing and the request loop of the guidance
// protocol. Frames are `<decimal byte length>\n<json>\n`. The first frame
// each way is a hello carrying the manifest hash.

export const PROTOCOL_VERSION = 1;

export interface GuidanceRequest {
  id: number;
  stateTokens: number[];
  prefix: number[];
}

export function encodeFrame(obj: unknown): Buffer {
  const payload = Buffer.from(JSON.stringify(obj), "utf-8");
  return Buffer.concat([
    Buffer.from(String(payload.length) + "\n", "ascii"),
    payload,
    Buffer.from("\n", "ascii"),
  ]);
}

export class FrameReader {
  private buf: Buffer = Buffer.alloc(0);

  feed(data: Buffer): void {
    this.buf = this.buf.length ? Buffer.concat([this.buf, data]) : Buffer.from(data);
  }

  /** The next decoded payload, or undefined when no complete frame is buffered. */
  next(): unknown | undefined {
    const newline = this.buf.indexOf(0x0a);
    if (newline < 0) return undefined;
    const header = this.buf.subarray(0, newline).toString("ascii");
    const length = Number(header);
    if (!Number.isInteger(length) || length < 0) {
      throw new Error(`malformed frame header: ${JSON.stringify(header)}`);
    }
    const end = newline + 1 + length;
    if (this.buf.length < end + 1) return undefined;
    if (this.buf[end] !== 0x0a) {
      throw new Error("missing frame terminator");
    }
    const payload = this.buf.subarray(newline + 1, end).toString("utf-8");
    this.buf = this.buf.subarray(end + 1);
    return JSON.parse(payload);
  }
}

function parseTokenList(value: unknown, what: string): number[] {
  if (!Array.isArray(value)) throw new Error(`${what} must be a list of token ids`);
  return value.map((t) => {
    if (typeof t !== "number" || !Number.isInteger(t) || t < 0) {
      throw new Error(`${what} holds a bad token id: ${JSON.stringify(t)}`);
    }
    return t;
  });
}

export interface ServeOptions {
  manifestSha256: string;
  deterministic: boolean;
  /** next-token distribution as sparse token -> probability */
  nextTokenProbs(req: GuidanceRequest): Map<number, number>;
  log?: (line: string) => void;
}

/**
 * Drive one connection: handshake, then answer requests until EOF.
 * `write` sends raw bytes; returns a feed function for incoming bytes and
 * an end callback.
 */
export function createConnectionHandler(opts: ServeOptions) {
  const reader = new FrameReader();
  let helloDone = false;
  let closed = false;

  return {
    feed(data: Buffer, write: (b: Buffer) => void, close: () => void): void {
      if (closed) return;
      reader.feed(data);
      while (!closed) {
        let frame: unknown;
        try {
          frame = reader.next();
        } catch (e) {
          write(encodeFrame({ type: "error", message: String(e) }));
          closed = true;
          close();
          return;
        }
        if (frame === undefined) return;
        if (!helloDone) {
          const hello = frame as { type?: string; manifest_sha256?: string };
          if (hello?.type !== "hello" || hello.manifest_sha256 !== opts.manifestSha256) {
            opts.log?.("refusing connection: manifest hash mismatch");
            write(encodeFrame({ type: "error", message: "manifest mismatch" }));
            closed = true;
            close();
            return;
          }
          write(
            encodeFrame({
              type: "hello",
              protocol: PROTOCOL_VERSION,
              manifest_sha256: opts.manifestSha256,
              deterministic: opts.deterministic,
            })
          );
          helloDone = true;
          continue;
        }
        const obj = frame as Record<string, unknown>;
        const id = typeof obj?.id === "number" ? (obj.id as number) : null;
        try {
          const req: GuidanceRequest = {
            id: id ?? -1,
            stateTokens: parseTokenList(obj?.state_tokens, "state_tokens"),
            prefix: parseTokenList(obj?.prefix, "prefix"),
          };
          const probs = opts.nextTokenProbs(req);
          const out: Record<string, number> = {};
          for (const [tok, p] of probs) {
            if (p > 0) out[String(tok)] = p;
          }
          write(encodeFrame({ id, probs: out }));
        } catch (e) {
          write(encodeFrame({ id, error: String(e instanceof Error ? e.message : e) }));
        }
      }
    },
  };
}
