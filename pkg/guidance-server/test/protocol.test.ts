import { describe, expect, it } from "vitest";
import { createConnectionHandler, encodeFrame, FrameReader, GuidanceRequest } from "../src/protocol.js";

const SHA = "a".repeat(64);

function pipe(opts?: Partial<Parameters<typeof createConnectionHandler>[0]>) {
  const written: Buffer[] = [];
  let closed = false;
  const handler = createConnectionHandler({
    manifestSha256: SHA,
    deterministic: true,
    nextTokenProbs: (req: GuidanceRequest) => new Map([[1, 0.25], [2, 0.75]]),
    ...opts,
  });
  const reader = new FrameReader();
  return {
    send(obj: unknown) {
      handler.feed(encodeFrame(obj), (b) => written.push(b), () => (closed = true));
    },
    sendRaw(data: Buffer) {
      handler.feed(data, (b) => written.push(b), () => (closed = true));
    },
    frames(): unknown[] {
      for (const chunk of written.splice(0)) reader.feed(chunk);
      const out: unknown[] = [];
      for (;;) {
        const f = reader.next();
        if (f === undefined) return out;
        out.push(f);
      }
    },
    get closed() {
      return closed;
    },
  };
}

describe("framing", () => {
  it("round-trips payloads", () => {
    const reader = new FrameReader();
    reader.feed(encodeFrame({ id: 3, probs: { "7": 0.5 } }));
    expect(reader.next()).toEqual({ id: 3, probs: { "7": 0.5 } });
    expect(reader.next()).toBeUndefined();
  });

  it("handles byte-at-a-time delivery", () => {
    const frame = encodeFrame([1, 2, 3]);
    const reader = new FrameReader();
    for (let i = 0; i < frame.length - 1; i++) {
      reader.feed(frame.subarray(i, i + 1));
      expect(reader.next()).toBeUndefined();
    }
    reader.feed(frame.subarray(frame.length - 1));
    expect(reader.next()).toEqual([1, 2, 3]);
  });

  it("rejects malformed headers", () => {
    const reader = new FrameReader();
    reader.feed(Buffer.from("banana\n{}\n"));
    expect(() => reader.next()).toThrow(/frame header/);
  });
});

describe("connection handler", () => {
  const hello = { type: "hello", protocol: 1, manifest_sha256: SHA };

  it("answers the handshake and then requests", () => {
    const conn = pipe();
    conn.send(hello);
    conn.send({ id: 1, state_tokens: [5, 6], prefix: [] });
    const frames = conn.frames() as any[];
    expect(frames[0]).toMatchObject({ type: "hello", manifest_sha256: SHA, deterministic: true });
    expect(frames[1]).toEqual({ id: 1, probs: { "1": 0.25, "2": 0.75 } });
  });

  it("refuses a wrong manifest hash and closes", () => {
    const conn = pipe();
    conn.send({ type: "hello", protocol: 1, manifest_sha256: "b".repeat(64) });
    const frames = conn.frames() as any[];
    expect(frames[0].type).toBe("error");
    expect(conn.closed).toBe(true);
  });

  it("echoes the id on malformed requests and keeps serving", () => {
    const conn = pipe();
    conn.send(hello);
    conn.send({ id: 42, state_tokens: "nope", prefix: [] });
    conn.send({ id: 43, state_tokens: [1], prefix: [2] });
    const frames = conn.frames() as any[];
    expect(frames[1].id).toBe(42);
    expect(frames[1].error).toMatch(/state_tokens/);
    expect(frames[2]).toMatchObject({ id: 43 });
    expect(conn.closed).toBe(false);
  });

  it("never crashes on fuzzed valid requests", () => {
    let calls = 0;
    const conn = pipe({
      nextTokenProbs: () => {
        calls++;
        return new Map([[0, 1.0]]);
      },
    });
    conn.send(hello);
    let seed = 12345;
    const rand = () => (seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31;
    for (let i = 0; i < 300; i++) {
      const stateLen = Math.floor(rand() * 50);
      const prefixLen = Math.floor(rand() * 6);
      conn.send({
        id: i,
        state_tokens: Array.from({ length: stateLen }, () => Math.floor(rand() * 68)),
        prefix: Array.from({ length: prefixLen }, () => Math.floor(rand() * 57)),
      });
    }
    const frames = conn.frames() as any[];
    expect(frames.length).toBe(301);
    expect(calls).toBe(300);
    expect(conn.closed).toBe(false);
  });
});
