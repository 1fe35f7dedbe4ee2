/** Test helpers: build images from ASCII art and write them as PNGs. */

import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { PNG } from "pngjs";

import type { RgbImage } from "../src/image.js";

export const FIRE_RGB: [number, number, number] = [230, 120, 20];
export const DARK_RGB: [number, number, number] = [30, 40, 50];

/** '#' pixels are fire-colored, everything else is dark background. */
export function asciiImage(rows: string[]): RgbImage {
  const height = rows.length;
  const width = rows[0].length;
  const rgb = new Uint8Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = rows[y][x] === "#" ? FIRE_RGB : DARK_RGB;
      const i = (y * width + x) * 3;
      rgb[i] = r;
      rgb[i + 1] = g;
      rgb[i + 2] = b;
    }
  }
  return { width, height, rgb };
}

export function asciiBits(rows: string[]): Uint8Array {
  const bits = new Uint8Array(rows.length * rows[0].length);
  rows.forEach((row, y) => {
    for (let x = 0; x < row.length; x++) {
      if (row[x] === "#") {
        bits[y * row.length + x] = 1;
      }
    }
  });
  return bits;
}

export function writePng(image: RgbImage, name = "image.png"): string {
  const png = new PNG({ width: image.width, height: image.height });
  for (let i = 0; i < image.width * image.height; i++) {
    png.data[i * 4] = image.rgb[i * 3];
    png.data[i * 4 + 1] = image.rgb[i * 3 + 1];
    png.data[i * 4 + 2] = image.rgb[i * 3 + 2];
    png.data[i * 4 + 3] = 255;
  }
  const dir = mkdtempSync(join(tmpdir(), "promptseg-server-"));
  const path = join(dir, name);
  writeFileSync(path, PNG.sync.write(png));
  return path;
}
