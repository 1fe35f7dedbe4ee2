#!/usr/bin/env node
/**
 * Model server: answers SEGMENT/DETECT requests over the wire protocol,
 * on stdin/stdout (default) or a local TCP socket (--listen tcp:PORT).
 * Diagnostics go to stderr; stdout carries only protocol replies.
 */

import { createServer, type Socket } from "node:net";
import { createInterface } from "node:readline";
import { parseArgs } from "node:util";
import { performance } from "node:perf_hooks";

import { readImage } from "./image.js";
import { availableModels, loadModel, type FireModel } from "./model.js";
import {
  PROTOCOL_VERSION,
  RequestError,
  boxesReply,
  encodeMask,
  errorReply,
  helloReply,
  maskReply,
  parseRequest,
  type SegmentRequest,
} from "./protocol.js";

export interface ServerConfig {
  model: string;
  device: string;
  listen: string;
}

/**
 * One conversation: strict request -> reply alternation. Transport-agnostic
 * so the tests can drive it line by line without a process or socket.
 */
export class Session {
  private helloDone = false;

  constructor(
    private readonly model: FireModel,
    private readonly write: (line: string) => void,
    /** Called after a fatal reply (version mismatch); must stop the session. */
    private readonly fatal: () => void,
  ) {}

  handleLine(line: string): void {
    if (line.trim() === "") {
      return;
    }
    try {
      this.write(this.reply(line));
    } catch (err) {
      if (err instanceof RequestError) {
        this.write(errorReply(err.code, err.message));
      } else {
        this.write(errorReply("internal", (err as Error).message));
      }
    }
  }

  private reply(line: string): string {
    const request = parseRequest(line);
    if (request.type === "HELLO") {
      if (request.protocol_version !== PROTOCOL_VERSION) {
        this.write(
          errorReply(
            "version-mismatch",
            `server speaks protocol ${PROTOCOL_VERSION}, client sent ${request.protocol_version}`,
          ),
        );
        this.fatal();
        return "";
      }
      this.helloDone = true;
      return helloReply(this.model.name);
    }
    if (!this.helloDone) {
      throw new RequestError("handshake-required", "send HELLO before other requests");
    }
    if (request.type === "SEGMENT") {
      return this.segment(request);
    }
    const image = readImage(request.image_path);
    return boxesReply(this.model.detect(image, request.conf));
  }

  private segment(request: SegmentRequest): string {
    const image = readImage(request.image_path);
    if (image.width !== request.width || image.height !== request.height) {
      throw new RequestError(
        "bad-request",
        `image is ${image.width}x${image.height}, request says ${request.width}x${request.height}`,
      );
    }
    const started = performance.now();
    const mask = this.model.segment(image, request);
    const inferMs = performance.now() - started;
    const peakMb = request.want_memory
      ? process.memoryUsage().rss / (1024 * 1024)
      : 0.0;
    return maskReply(
      encodeMask(mask),
      Math.round(inferMs * 1000) / 1000,
      Math.round(peakMb * 100) / 100,
    );
  }
}

function serveStdio(model: FireModel): void {
  const session = new Session(
    model,
    (line) => process.stdout.write(line),
    () => process.exit(1),
  );
  const reader = createInterface({ input: process.stdin, crlfDelay: Infinity });
  reader.on("line", (line) => session.handleLine(line));
  reader.on("close", () => process.exit(0));
}

function serveTcp(model: FireModel, port: number): void {
  let active: Socket | null = null;
  const server = createServer((socket) => {
    if (active) {
      // One connection at a time; the harness starts one process per worker.
      socket.destroy();
      return;
    }
    active = socket;
    const session = new Session(
      model,
      (line) => socket.write(line),
      () => {
        socket.end();
        server.close();
        process.exitCode = 1;
      },
    );
    const reader = createInterface({ input: socket, crlfDelay: Infinity });
    reader.on("line", (line) => session.handleLine(line));
    socket.on("close", () => {
      active = null;
    });
    socket.on("error", () => {
      active = null;
    });
  });
  server.listen(port, "127.0.0.1", () => {
    const address = server.address();
    const bound = typeof address === "object" && address ? address.port : port;
    process.stderr.write(`promptseg-server: listening on 127.0.0.1:${bound}\n`);
  });
}

const USAGE = `usage: promptseg-server [--model ID] [--listen stdio|tcp:PORT] [--device ID]

  --model   model provider to load (default: hsv; available: ${availableModels().join(", ")})
  --listen  stdio (default) or tcp:PORT (127.0.0.1, port 0 picks a free one)
  --device  device label recorded in the config (default: cpu)
`;

export function parseConfig(argv: string[]): ServerConfig {
  const { values } = parseArgs({
    args: argv,
    options: {
      model: { type: "string", default: "hsv" },
      listen: { type: "string", default: "stdio" },
      device: { type: "string", default: "cpu" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help) {
    process.stdout.write(USAGE);
    process.exit(0);
  }
  return { model: values.model!, device: values.device!, listen: values.listen! };
}

function main(): void {
  let config: ServerConfig;
  let model: FireModel;
  try {
    config = parseConfig(process.argv.slice(2));
    // The model must resolve before any HELLO is answered.
    model = loadModel(config.model);
  } catch (err) {
    process.stderr.write(`promptseg-server: ${(err as Error).message}\n${USAGE}`);
    process.exit(1);
  }
  process.stderr.write(
    `promptseg-server: model=${model.name} device=${config.device}\n`,
  );
  if (config.listen === "stdio") {
    serveStdio(model);
    return;
  }
  const tcp = /^tcp:(\d+)$/.exec(config.listen);
  if (!tcp) {
    process.stderr.write(`promptseg-server: bad --listen ${config.listen}\n${USAGE}`);
    process.exit(1);
  }
  serveTcp(model, Number(tcp[1]));
}

const isEntry =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isEntry) {
  main();
}
