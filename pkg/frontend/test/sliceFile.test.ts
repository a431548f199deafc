import { describe, expect, it } from "vitest";
import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

import { FormatError, axisCoordinate, parseHeader, readSlice }
    from "../src/sliceFile.js";

const FIXTURES = new URL("./fixtures/", import.meta.url).pathname;

function writePair(dir: string, name: string, header: string,
                   values: number[]): string {
    const base = join(dir, name);
    writeFileSync(`${base}.txt`, header);
    const buf = Buffer.alloc(values.length * 8);
    values.forEach((v, i) => buf.writeDoubleLE(v, i * 8));
    writeFileSync(`${base}.bin`, buf);
    return base;
}

describe("slice header parsing", () => {
    it("round-trips a simple header", () => {
        const meta = parseHeader("dims=2\nlengths=4.0 4.0\ncounts=8 8\nt=0.5\n");
        expect(meta.dims).toBe(2);
        expect(meta.lengths).toEqual([4, 4]);
        expect(meta.counts).toEqual([8, 8]);
        expect(meta.t).toBe(0.5);
    });

    it("rejects missing keys", () => {
        expect(() => parseHeader("dims=2\nlengths=4 4\n")).toThrow(FormatError);
    });

    it("rejects inconsistent dimensions", () => {
        expect(() => parseHeader("dims=2\nlengths=4.0\ncounts=8 8\nt=0\n"))
            .toThrow(FormatError);
    });
});

describe("slice payload", () => {
    it("reads interleaved little-endian pairs row-major", () => {
        const dir = mkdtempSync(join(tmpdir(), "slice-"));
        const base = writePair(dir, "tiny",
                               "dims=1\nlengths=2.0\ncounts=2\nt=0.0\n",
                               [3, 4, 0.5, 0]);
        const slice = readSlice(base);
        expect(slice.re[0]).toBe(3);
        expect(slice.im[0]).toBe(4);
        expect(slice.magnitude[0]).toBe(5);
        expect(slice.magnitude[1]).toBe(0.5);
    });

    it("rejects truncated payloads", () => {
        const dir = mkdtempSync(join(tmpdir(), "slice-"));
        const base = writePair(dir, "short",
                               "dims=1\nlengths=2.0\ncounts=4\nt=0.0\n",
                               [1, 2]);
        expect(() => readSlice(base)).toThrow(FormatError);
    });

    it("reads a solver-produced fixture", () => {
        const slice = readSlice(
            join(FIXTURES, "lattice/averaged/slice_00000300.bin"));
        expect(slice.meta.dims).toBe(2);
        expect(slice.meta.counts).toEqual([32, 32]);
        expect(slice.magnitude.length).toBe(32 * 32);
        expect(Math.max(...slice.magnitude)).toBeGreaterThan(0);
    });

    it("maps sample index to model coordinates", () => {
        const meta = parseHeader("dims=2\nlengths=4.0 4.0\ncounts=8 8\nt=0\n");
        expect(axisCoordinate(meta, 0, 0)).toBe(-2);
        expect(axisCoordinate(meta, 0, 4)).toBe(0);
    });
});
