import { readFileSync } from "fs";
import { csvParse } from "d3-dsv";

export const DIAGNOSTIC_COLUMNS = [
    "t", "mass", "kinetic", "hartree", "potential", "nonlinear", "total",
    "h1", "max_density",
] as const;

export interface DiagnosticsSeries {
    t: number[];
    mass: number[];
    total: number[];
    h1: number[];
}

export class SchemaError extends Error {}

export function readDiagnostics(path: string): DiagnosticsSeries {
    const rows = csvParse(readFileSync(path, "utf8"));
    for (const col of DIAGNOSTIC_COLUMNS) {
        if (!rows.columns.includes(col)) {
            throw new SchemaError(`${path} lacks diagnostics column '${col}'`);
        }
    }
    if (rows.length === 0) {
        throw new SchemaError(`${path} holds no diagnostics rows`);
    }
    const pick = (col: string) => rows.map((r) => {
        const v = Number(r[col]);
        if (!isFinite(v) && !Number.isNaN(v)) return v;
        return v;
    });
    return { t: pick("t"), mass: pick("mass"), total: pick("total"),
             h1: pick("h1") };
}

/** Trapezoid average of a sampled series over [t, t+window]; the right
 *  endpoint is linearly interpolated so linear series are averaged exactly.
 *  Mirrors the solver's own windowing so figures match its reports. */
export function windowAverage(t: number[], v: number[], window: number):
        { t: number[]; v: number[] } {
    if (window <= 0) throw new RangeError("window must be positive");
    if (t.length !== v.length || t.length < 2) {
        throw new RangeError("series must have equal lengths >= 2");
    }
    const tEnd = t[t.length - 1];
    const outT: number[] = [];
    const outV: number[] = [];
    const eps = 1e-12 * Math.max(1, Math.abs(tEnd));
    for (let i = 0; i < t.length; i++) {
        const hi = t[i] + window;
        if (hi > tEnd + eps) break;
        let integral = 0;
        let j = i;
        while (j + 1 < t.length && t[j + 1] <= hi + eps) {
            integral += 0.5 * (v[j] + v[j + 1]) * (t[j + 1] - t[j]);
            j++;
        }
        if (t[j] < hi - eps) {
            const frac = (hi - t[j]) / (t[j + 1] - t[j]);
            const vHi = v[j] + frac * (v[j + 1] - v[j]);
            integral += 0.5 * (v[j] + vHi) * (hi - t[j]);
        }
        outT.push(t[i]);
        outV.push(integral / window);
    }
    return { t: outT, v: outV };
}

export function interpolateAt(t: number[], v: number[], at: number[]): number[] {
    return at.map((x) => {
        if (x <= t[0]) return v[0];
        if (x >= t[t.length - 1]) return v[v.length - 1];
        let lo = 0;
        let hi = t.length - 1;
        while (hi - lo > 1) {
            const mid = (lo + hi) >> 1;
            if (t[mid] <= x) lo = mid; else hi = mid;
        }
        const frac = (x - t[lo]) / (t[hi] - t[lo]);
        return v[lo] + frac * (v[hi] - v[lo]);
    });
}
