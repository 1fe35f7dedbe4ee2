/** Image loading: 8-bit PNG or JPEG from disk into flat RGB. */

import { readFileSync } from "node:fs";

import jpeg from "jpeg-js";
import { PNG } from "pngjs";

import { RequestError } from "./protocol.js";

export interface RgbImage {
  width: number;
  height: number;
  /** Row-major RGB triples, width*height*3 bytes. */
  rgb: Uint8Array;
}

const PNG_MAGIC = Buffer.from([0x89, 0x50, 0x4e, 0x47]);
const JPEG_MAGIC = Buffer.from([0xff, 0xd8, 0xff]);

function stripAlpha(rgba: Uint8Array, pixels: number): Uint8Array {
  const rgb = new Uint8Array(pixels * 3);
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = rgba[i * 4];
    rgb[i * 3 + 1] = rgba[i * 4 + 1];
    rgb[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return rgb;
}

export function readImage(path: string): RgbImage {
  let data: Buffer;
  try {
    data = readFileSync(path);
  } catch (err) {
    throw new RequestError("io", `cannot read image ${path}: ${(err as Error).message}`);
  }
  try {
    if (data.subarray(0, 4).equals(PNG_MAGIC)) {
      const png = PNG.sync.read(data);
      return {
        width: png.width,
        height: png.height,
        rgb: stripAlpha(png.data, png.width * png.height),
      };
    }
    if (data.subarray(0, 3).equals(JPEG_MAGIC)) {
      const img = jpeg.decode(data, { useTArray: true, formatAsRGBA: true });
      return {
        width: img.width,
        height: img.height,
        rgb: stripAlpha(img.data, img.width * img.height),
      };
    }
  } catch (err) {
    if (err instanceof RequestError) {
      throw err;
    }
    throw new RequestError("io", `cannot decode image ${path}: ${(err as Error).message}`);
  }
  throw new RequestError("io", `unsupported image format in ${path} (need PNG or JPEG)`);
}
