/**
 * Wire protocol, server side: newline-delimited compact JSON, one request
 * in -> one reply out. Replies are emitted with the canonical field order
 * so a byte-level reader sees exactly what the docs show.
 */

export const PROTOCOL_VERSION = 1;

export interface HelloRequest {
  type: "HELLO";
  protocol_version: number;
  model_name: string;
}

export interface SegmentRequest {
  type: "SEGMENT";
  image_path: string;
  width: number;
  height: number;
  mode: "auto" | "prompted";
  /** [x0, y0, x1, y1], half-open pixel coordinates. */
  box?: [number, number, number, number];
  /** [x, y, flag] with flag 1 = positive, 0 = negative. */
  points?: [number, number, number][];
  want_memory?: boolean;
}

export interface DetectRequest {
  type: "DETECT";
  image_path: string;
  conf: number;
}

export type Request = HelloRequest | SegmentRequest | DetectRequest;

export interface DetectedBox {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
  conf: number;
}

/** Thrown by request handling; becomes an ERROR reply, connection stays up. */
export class RequestError extends Error {
  constructor(
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/**
 * Row-major run-length encoding: space-separated decimal run lengths,
 * alternating background/fire, background first (a leading 0 means the
 * mask starts with fire). Runs always sum to the mask size.
 */
export function encodeMask(bits: Uint8Array): string {
  if (bits.length === 0) {
    return "";
  }
  const runs: number[] = [];
  let current = bits[0] ? 1 : 0;
  if (current === 1) {
    runs.push(0);
  }
  let run = 1;
  for (let i = 1; i < bits.length; i++) {
    const bit = bits[i] ? 1 : 0;
    if (bit === current) {
      run++;
    } else {
      runs.push(run);
      current = bit;
      run = 1;
    }
  }
  runs.push(run);
  return runs.join(" ");
}

/** Inverse of encodeMask; used by the tests to round-trip replies. */
export function decodeMask(rle: string, size: number): Uint8Array {
  const out = new Uint8Array(size);
  if (rle.trim() === "") {
    if (size !== 0) {
      throw new RequestError("bad-rle", `empty RLE for size ${size}`);
    }
    return out;
  }
  let pos = 0;
  let value = 0;
  for (const token of rle.trim().split(/\s+/)) {
    const run = Number(token);
    if (!Number.isInteger(run) || run < 0) {
      throw new RequestError("bad-rle", `bad run ${JSON.stringify(token)}`);
    }
    if (value === 1) {
      out.fill(1, pos, pos + run);
    }
    pos += run;
    value ^= 1;
  }
  if (pos !== size) {
    throw new RequestError("bad-rle", `runs sum to ${pos}, expected ${size}`);
  }
  return out;
}

// JSON.stringify preserves object-literal insertion order, which is how the
// canonical field order below is guaranteed.

export function helloReply(modelName: string): string {
  return (
    JSON.stringify({
      type: "HELLO",
      protocol_version: PROTOCOL_VERSION,
      model_name: modelName,
    }) + "\n"
  );
}

export function maskReply(rle: string, inferMs: number, peakMemMb: number): string {
  return (
    JSON.stringify({ type: "MASK", rle, infer_ms: inferMs, peak_mem_mb: peakMemMb }) +
    "\n"
  );
}

export function boxesReply(boxes: DetectedBox[]): string {
  return (
    JSON.stringify({
      type: "BOXES",
      boxes: boxes.map((b) => [b.x0, b.y0, b.x1, b.y1, b.conf]),
    }) + "\n"
  );
}

export function errorReply(code: string, message: string): string {
  return JSON.stringify({ type: "ERROR", code, message }) + "\n";
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function asCount(value: unknown, field: string): number {
  if (typeof value !== "number" || !Number.isInteger(value) || value <= 0) {
    throw new RequestError("bad-request", `${field} must be a positive integer`);
  }
  return value;
}

/** Parse one request line; malformed input raises RequestError. */
export function parseRequest(line: string): Request {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new RequestError("bad-request", "request is not valid JSON");
  }
  if (!isRecord(raw) || typeof raw.type !== "string") {
    throw new RequestError("bad-request", "request must be an object with a type");
  }
  switch (raw.type) {
    case "HELLO": {
      if (typeof raw.protocol_version !== "number" || typeof raw.model_name !== "string") {
        throw new RequestError("bad-request", "HELLO needs protocol_version and model_name");
      }
      return {
        type: "HELLO",
        protocol_version: raw.protocol_version,
        model_name: raw.model_name,
      };
    }
    case "SEGMENT": {
      if (typeof raw.image_path !== "string") {
        throw new RequestError("bad-request", "SEGMENT needs image_path");
      }
      const width = asCount(raw.width, "width");
      const height = asCount(raw.height, "height");
      if (raw.mode !== "auto" && raw.mode !== "prompted") {
        throw new RequestError("bad-request", `unknown mode ${JSON.stringify(raw.mode)}`);
      }
      const req: SegmentRequest = {
        type: "SEGMENT",
        image_path: raw.image_path,
        width,
        height,
        mode: raw.mode,
        want_memory: raw.want_memory === true,
      };
      if (raw.box !== undefined) {
        if (
          !Array.isArray(raw.box) ||
          raw.box.length !== 4 ||
          raw.box.some((v) => typeof v !== "number" || !Number.isInteger(v))
        ) {
          throw new RequestError("bad-request", "box must be [x0,y0,x1,y1]");
        }
        const [x0, y0, x1, y1] = raw.box as number[];
        if (!(x0 >= 0 && x0 < x1 && x1 <= width && y0 >= 0 && y0 < y1 && y1 <= height)) {
          throw new RequestError("bad-request", `box [${raw.box}] out of bounds`);
        }
        req.box = [x0, y0, x1, y1];
      }
      if (raw.points !== undefined) {
        if (!Array.isArray(raw.points)) {
          throw new RequestError("bad-request", "points must be a list");
        }
        req.points = raw.points.map((p) => {
          if (
            !Array.isArray(p) ||
            p.length !== 3 ||
            p.some((v) => typeof v !== "number" || !Number.isInteger(v)) ||
            (p[2] !== 0 && p[2] !== 1)
          ) {
            throw new RequestError("bad-request", "each point must be [x,y,flag01]");
          }
          const [x, y] = p as number[];
          if (x < 0 || x >= width || y < 0 || y >= height) {
            throw new RequestError("bad-request", `point (${x},${y}) out of bounds`);
          }
          return [p[0], p[1], p[2]] as [number, number, number];
        });
      }
      if (req.mode === "auto" && (req.box || (req.points && req.points.length))) {
        throw new RequestError("bad-request", "auto mode carries no box or points");
      }
      return req;
    }
    case "DETECT": {
      if (typeof raw.image_path !== "string") {
        throw new RequestError("bad-request", "DETECT needs image_path");
      }
      if (typeof raw.conf !== "number" || !(raw.conf >= 0 && raw.conf <= 1)) {
        throw new RequestError("bad-request", "conf must be in [0, 1]");
      }
      return { type: "DETECT", image_path: raw.image_path, conf: raw.conf };
    }
    default:
      throw new RequestError("bad-request", `unknown request type ${JSON.stringify(raw.type)}`);
  }
}
