/**
 * Model providers. The shipped provider is a deterministic HSV fire-color
 * heuristic: no checkpoints to resolve, same answer every run, which makes
 * it a usable stand-in wherever real segmentation weights can't be loaded
 * (CI, protocol conformance, harness development). Real models implement
 * the same FireModel interface.
 */

import type { RgbImage } from "./image.js";
import { RequestError, type DetectedBox, type SegmentRequest } from "./protocol.js";

export interface FireModel {
  readonly name: string;
  /** Binary mask (width*height bytes, 1 = fire) honoring the request's prompts. */
  segment(image: RgbImage, request: SegmentRequest): Uint8Array;
  /** Raw detections; the client clips and applies its own threshold. */
  detect(image: RgbImage, conf: number): DetectedBox[];
}

// Fire-color gate: hue in [0, 65] or [340, 360] degrees, saturation >= 0.2,
// value >= 0.5 (hexcone HSV). Matches the harness's prompt-placement gate so
// the two sides agree on what "fire-colored" means.
const HUE_RANGES: [number, number][] = [
  [0, 65],
  [340, 360],
];
const S_MIN = 0.2;
const V_MIN = 0.5;

export function isFireColored(r: number, g: number, b: number): boolean {
  const rf = r / 255;
  const gf = g / 255;
  const bf = b / 255;
  const maxc = Math.max(rf, gf, bf);
  const minc = Math.min(rf, gf, bf);
  const delta = maxc - minc;
  const v = maxc;
  const s = maxc === 0 ? 0 : delta / maxc;
  if (s < S_MIN || v < V_MIN) {
    return false;
  }
  let h: number;
  if (delta === 0) {
    h = 0;
  } else if (maxc === rf) {
    h = 60 * ((gf - bf) / delta);
    if (h < 0) {
      h += 360;
    }
  } else if (maxc === gf) {
    h = 60 * ((bf - rf) / delta + 2);
  } else {
    h = 60 * ((rf - gf) / delta + 4);
  }
  return HUE_RANGES.some(([lo, hi]) => h >= lo && h <= hi);
}

export function fireMask(image: RgbImage): Uint8Array {
  const n = image.width * image.height;
  const out = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    if (isFireColored(image.rgb[i * 3], image.rgb[i * 3 + 1], image.rgb[i * 3 + 2])) {
      out[i] = 1;
    }
  }
  return out;
}

/** 4-connected labeling; labels are 1-based in raster order of first pixel. */
export function label4(
  bits: Uint8Array,
  width: number,
  height: number,
): { labels: Int32Array; count: number } {
  const labels = new Int32Array(width * height);
  const stack = new Int32Array(width * height);
  let count = 0;
  for (let start = 0; start < bits.length; start++) {
    if (!bits[start] || labels[start]) {
      continue;
    }
    count++;
    labels[start] = count;
    stack[0] = start;
    let top = 1;
    while (top > 0) {
      const index = stack[--top];
      const x = index % width;
      const y = (index - x) / width;
      if (y > 0 && bits[index - width] && !labels[index - width]) {
        labels[index - width] = count;
        stack[top++] = index - width;
      }
      if (y + 1 < height && bits[index + width] && !labels[index + width]) {
        labels[index + width] = count;
        stack[top++] = index + width;
      }
      if (x > 0 && bits[index - 1] && !labels[index - 1]) {
        labels[index - 1] = count;
        stack[top++] = index - 1;
      }
      if (x + 1 < width && bits[index + 1] && !labels[index + 1]) {
        labels[index + 1] = count;
        stack[top++] = index + 1;
      }
    }
  }
  return { labels, count };
}

class HsvModel implements FireModel {
  readonly name = "hsv";

  segment(image: RgbImage, request: SegmentRequest): Uint8Array {
    const base = fireMask(image);
    if (request.mode === "auto") {
      // Automatic mask generation: every fire-colored region, unprompted.
      return base;
    }
    if (request.box) {
      // A box outranks any points sent alongside it.
      const [x0, y0, x1, y1] = request.box;
      const out = new Uint8Array(base.length);
      for (let y = y0; y < y1; y++) {
        for (let x = x0; x < x1; x++) {
          out[y * image.width + x] = base[y * image.width + x];
        }
      }
      return out;
    }
    // Point prompts select whole fire-colored components: keep every
    // component containing a positive point, then drop any containing a
    // negative point.
    const { labels } = label4(base, image.width, image.height);
    const keep = new Set<number>();
    const drop = new Set<number>();
    for (const [x, y, flag] of request.points ?? []) {
      const label = labels[y * image.width + x];
      if (label === 0) {
        continue;
      }
      (flag === 1 ? keep : drop).add(label);
    }
    const out = new Uint8Array(base.length);
    for (let i = 0; i < base.length; i++) {
      const label = labels[i];
      if (label && keep.has(label) && !drop.has(label)) {
        out[i] = 1;
      }
    }
    return out;
  }

  detect(image: RgbImage, conf: number): DetectedBox[] {
    const base = fireMask(image);
    const { labels, count } = label4(base, image.width, image.height);
    if (count === 0) {
      return [];
    }
    const minX = new Int32Array(count).fill(image.width);
    const minY = new Int32Array(count).fill(image.height);
    const maxX = new Int32Array(count).fill(-1);
    const maxY = new Int32Array(count).fill(-1);
    const area = new Int32Array(count);
    for (let i = 0; i < labels.length; i++) {
      const label = labels[i];
      if (!label) {
        continue;
      }
      const k = label - 1;
      const x = i % image.width;
      const y = (i - x) / image.width;
      if (x < minX[k]) minX[k] = x;
      if (x > maxX[k]) maxX[k] = x;
      if (y < minY[k]) minY[k] = y;
      if (y > maxY[k]) maxY[k] = y;
      area[k]++;
    }
    const boxes: DetectedBox[] = [];
    for (let k = 0; k < count; k++) {
      const w = maxX[k] - minX[k] + 1;
      const h = maxY[k] - minY[k] + 1;
      boxes.push({
        x0: minX[k],
        y0: minY[k],
        x1: maxX[k] + 1,
        y1: maxY[k] + 1,
        // Confidence = how much of the box is actually fire-colored, so
        // ragged smears score lower than solid flame blobs.
        conf: area[k] / (w * h),
      });
    }
    const kept = boxes.filter((b) => b.conf >= conf);
    kept.sort((a, b) => b.conf - a.conf || a.y0 - b.y0 || a.x0 - b.x0);
    return kept;
  }
}

const PROVIDERS: Record<string, () => FireModel> = {
  hsv: () => new HsvModel(),
};

/** Resolve a --model flag to a provider; unknown ids fail before HELLO. */
export function loadModel(id: string): FireModel {
  const factory = PROVIDERS[id];
  if (!factory) {
    const known = Object.keys(PROVIDERS).join(", ");
    throw new RequestError("model", `unknown model ${JSON.stringify(id)} (available: ${known})`);
  }
  return factory();
}

export function availableModels(): string[] {
  return Object.keys(PROVIDERS).sort();
}
