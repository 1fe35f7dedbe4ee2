import { spawn } from "node:child_process";
import { existsSync } from "node:fs";
import { join } from "node:path";
import { createInterface } from "node:readline";

import { describe, expect, it } from "vitest";

import { loadModel } from "../src/model.js";
import { decodeMask } from "../src/protocol.js";
import { Session, parseConfig } from "../src/server.js";

import { asciiBits, asciiImage, writePng } from "./util.js";

const GOLDEN_HELLO = '{"type":"HELLO","protocol_version":1,"model_name":"promptseg-harness"}\n';

function makeSession() {
  const written: string[] = [];
  let fatal = false;
  const session = new Session(
    loadModel("hsv"),
    (line) => written.push(line),
    () => {
      fatal = true;
    },
  );
  return { session, written, isFatal: () => fatal };
}

describe("session", () => {
  it("answers the golden handshake with canonical bytes", () => {
    const { session, written } = makeSession();
    session.handleLine(GOLDEN_HELLO.trimEnd());
    expect(written).toEqual(['{"type":"HELLO","protocol_version":1,"model_name":"hsv"}\n']);
  });

  it("requires the handshake before other requests", () => {
    const { session, written } = makeSession();
    session.handleLine('{"type":"DETECT","image_path":"/x.png","conf":0.3}');
    expect(JSON.parse(written[0])).toMatchObject({
      type: "ERROR",
      code: "handshake-required",
    });
  });

  it("treats a protocol version mismatch as fatal", () => {
    const { session, written, isFatal } = makeSession();
    session.handleLine('{"type":"HELLO","protocol_version":2,"model_name":"harness"}');
    expect(JSON.parse(written[0])).toMatchObject({ type: "ERROR", code: "version-mismatch" });
    expect(isFatal()).toBe(true);
  });

  it("recovers after a malformed request", () => {
    const { session, written } = makeSession();
    session.handleLine("{nope");
    session.handleLine(GOLDEN_HELLO.trimEnd());
    expect(JSON.parse(written[0])).toMatchObject({ type: "ERROR", code: "bad-request" });
    expect(JSON.parse(written[1])).toMatchObject({ type: "HELLO" });
  });

  it("segments a real PNG and reports timing and memory", () => {
    const rows = ["..##", "..##", "...."];
    const path = writePng(asciiImage(rows));
    const { session, written } = makeSession();
    session.handleLine(GOLDEN_HELLO.trimEnd());
    session.handleLine(
      JSON.stringify({
        type: "SEGMENT",
        image_path: path,
        width: 4,
        height: 3,
        mode: "auto",
        want_memory: true,
      }),
    );
    const reply = JSON.parse(written[1]);
    expect(reply.type).toBe("MASK");
    expect(decodeMask(reply.rle, 12)).toEqual(asciiBits(rows));
    expect(reply.infer_ms).toBeGreaterThanOrEqual(0);
    expect(reply.peak_mem_mb).toBeGreaterThan(0);
  });

  it("reports zero memory when not asked for it", () => {
    const path = writePng(asciiImage(["#"]));
    const { session, written } = makeSession();
    session.handleLine(GOLDEN_HELLO.trimEnd());
    session.handleLine(
      JSON.stringify({ type: "SEGMENT", image_path: path, width: 1, height: 1, mode: "auto" }),
    );
    expect(JSON.parse(written[1]).peak_mem_mb).toBe(0);
  });

  it("rejects a request whose dimensions disagree with the file", () => {
    const path = writePng(asciiImage(["##", "##"]));
    const { session, written } = makeSession();
    session.handleLine(GOLDEN_HELLO.trimEnd());
    session.handleLine(
      JSON.stringify({ type: "SEGMENT", image_path: path, width: 3, height: 2, mode: "auto" }),
    );
    expect(JSON.parse(written[1])).toMatchObject({ type: "ERROR", code: "bad-request" });
  });

  it("answers io errors for unreadable images and keeps going", () => {
    const { session, written } = makeSession();
    session.handleLine(GOLDEN_HELLO.trimEnd());
    session.handleLine('{"type":"DETECT","image_path":"/no/such.png","conf":0.3}');
    session.handleLine('{"type":"DETECT","image_path":"/no/such.png","conf":0.3}');
    expect(JSON.parse(written[1])).toMatchObject({ type: "ERROR", code: "io" });
    expect(JSON.parse(written[2])).toMatchObject({ type: "ERROR", code: "io" });
  });
});

describe("parseConfig", () => {
  it("applies defaults", () => {
    expect(parseConfig([])).toEqual({ model: "hsv", device: "cpu", listen: "stdio" });
  });

  it("accepts overrides", () => {
    expect(parseConfig(["--model", "hsv", "--listen", "tcp:9000", "--device", "gpu0"])).toEqual({
      model: "hsv",
      device: "gpu0",
      listen: "tcp:9000",
    });
  });
});

describe("built server process", () => {
  const serverJs = join(import.meta.dirname, "..", "dist", "server.js");

  it("speaks the protocol over stdio end to end", async () => {
    expect(existsSync(serverJs)).toBe(true);
    const rows = ["....", ".##.", ".##.", "...."];
    const path = writePng(asciiImage(rows));
    const proc = spawn(process.execPath, [serverJs, "--model", "hsv"], {
      stdio: ["pipe", "pipe", "ignore"],
    });
    const replies: string[] = [];
    const reader = createInterface({ input: proc.stdout });
    const done = new Promise<void>((resolve) => {
      reader.on("line", (line) => {
        replies.push(line);
        if (replies.length === 3) {
          proc.stdin.end();
          resolve();
        }
      });
    });
    proc.stdin.write(GOLDEN_HELLO);
    proc.stdin.write(
      JSON.stringify({
        type: "SEGMENT",
        image_path: path,
        width: 4,
        height: 4,
        mode: "prompted",
        box: [0, 0, 4, 4],
        points: [],
        want_memory: true,
      }) + "\n",
    );
    proc.stdin.write(JSON.stringify({ type: "DETECT", image_path: path, conf: 0.3 }) + "\n");
    await done;
    const exit = new Promise<number | null>((resolve) => proc.on("exit", resolve));

    expect(JSON.parse(replies[0])).toEqual({
      type: "HELLO",
      protocol_version: 1,
      model_name: "hsv",
    });
    const mask = JSON.parse(replies[1]);
    expect(mask.type).toBe("MASK");
    expect(decodeMask(mask.rle, 16)).toEqual(asciiBits(rows));
    expect(JSON.parse(replies[2])).toEqual({ type: "BOXES", boxes: [[1, 1, 3, 3, 1]] });
    expect(await exit).toBe(0);
  });

  it("exits nonzero for an unknown model", async () => {
    const proc = spawn(process.execPath, [serverJs, "--model", "sam-9000"], {
      stdio: ["ignore", "ignore", "ignore"],
    });
    const exit = await new Promise<number | null>((resolve) => proc.on("exit", resolve));
    expect(exit).toBe(1);
  });
});
