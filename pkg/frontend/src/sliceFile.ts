import { readFileSync } from "fs";

export interface SliceMeta {
    dims: number;
    lengths: number[];
    counts: number[];
    t: number;
}

export interface Slice {
    meta: SliceMeta;
    /** |u| at each sample, row-major over counts */
    magnitude: Float64Array;
    re: Float64Array;
    im: Float64Array;
}

export class FormatError extends Error {}

/** Parse the sidecar text header (dims, lengths, counts, t). */
export function parseHeader(text: string): SliceMeta {
    const fields = new Map<string, string>();
    for (const raw of text.split(/\r?\n/)) {
        const line = raw.trim();
        if (!line) continue;
        const eq = line.indexOf("=");
        if (eq < 0) throw new FormatError(`corrupt slice header line: ${line}`);
        fields.set(line.slice(0, eq).trim(), line.slice(eq + 1).trim());
    }
    for (const key of ["dims", "lengths", "counts", "t"]) {
        if (!fields.has(key)) throw new FormatError(`slice header missing ${key}`);
    }
    const dims = Number(fields.get("dims"));
    const lengths = fields.get("lengths")!.split(/\s+/).map(Number);
    const counts = fields.get("counts")!.split(/\s+/).map(Number);
    const t = Number(fields.get("t"));
    if (!Number.isInteger(dims) || dims < 1 || dims > 3
        || lengths.length !== dims || counts.length !== dims
        || lengths.some((v) => !isFinite(v) || v <= 0)
        || counts.some((v) => !Number.isInteger(v) || v < 1)
        || !isFinite(t)) {
        throw new FormatError("slice header is inconsistent");
    }
    return { dims, lengths, counts, t };
}

/** Read a slice pair <base>.bin / <base>.txt: little-endian float64
 *  (re, im) pairs in row-major order. */
export function readSlice(basePath: string): Slice {
    const base = basePath.replace(/\.(bin|txt)$/, "");
    const meta = parseHeader(readFileSync(`${base}.txt`, "utf8"));
    const payload = readFileSync(`${base}.bin`);
    const n = meta.counts.reduce((a, b) => a * b, 1);
    if (payload.length !== n * 16) {
        throw new FormatError(
            `slice payload ${base}.bin holds ${payload.length} bytes, `
            + `header promises ${n * 16}`);
    }
    const re = new Float64Array(n);
    const im = new Float64Array(n);
    const magnitude = new Float64Array(n);
    for (let i = 0; i < n; i++) {
        re[i] = payload.readDoubleLE(16 * i);
        im[i] = payload.readDoubleLE(16 * i + 8);
        magnitude[i] = Math.hypot(re[i], im[i]);
    }
    return { meta, magnitude, re, im };
}

/** Coordinate of sample j on an axis: -L/2 + j*L/N. */
export function axisCoordinate(meta: SliceMeta, axis: number, j: number): number {
    const L = meta.lengths[axis];
    const N = meta.counts[axis];
    return -L / 2 + (j * L) / N;
}
