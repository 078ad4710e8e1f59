import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { inflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";

// @ts-expect-error plain ESM script without type declarations
import { convertFile } from "../scripts/pgm2png.mjs";

const FIXTURE = join(__dirname, "fixtures", "frame_000000.pgm");

describe("pgm2png", () => {
  it("produces a valid grayscale PNG with the PGM's dimensions", () => {
    const out = join(mkdtempSync(join(tmpdir(), "pgm2png-")), "frame.png");
    const image = convertFile(FIXTURE, out) as {
      width: number;
      height: number;
      pixels: Uint8Array;
    };
    expect(image.width).toBe(640);
    expect(image.height).toBe(480);

    const png = readFileSync(out);
    expect([...png.slice(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    // IHDR: width/height big-endian at offsets 16/20, grayscale 8-bit
    expect(png.readUInt32BE(16)).toBe(640);
    expect(png.readUInt32BE(20)).toBe(480);
    expect(png[24]).toBe(8); // bit depth
    expect(png[25]).toBe(0); // color type: grayscale

    // decode the IDAT payload and spot-check pixels survive losslessly
    const idatLength = png.readUInt32BE(33);
    expect(png.slice(37, 41).toString("ascii")).toBe("IDAT");
    const raw = inflateSync(png.slice(41, 41 + idatLength));
    expect(raw.length).toBe(480 * (640 + 1));
    expect(raw[0]).toBe(0); // filter byte
    expect(raw[1]).toBe(image.pixels[0]);
    expect(raw[640 + 1 + 1]).toBe(image.pixels[640]); // second scanline
  });
});
