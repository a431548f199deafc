import { Slice } from "./sliceFile.js";

/** Median spacing of the |u| peaks along one axis of a slice.
 *
 *  The profile is taken through the row/column of the global maximum so the
 *  measurement sits where the field actually lives; peaks are strict local
 *  maxima above half the profile peak.  Returns NaN when fewer than two
 *  peaks qualify.
 */
export function measurePeakSpacing(slice: Slice, axis: 0 | 1 = 0): number {
    const counts = slice.meta.counts;
    const profile = extractProfile(slice, axis);
    const n = profile.length;
    const h = slice.meta.lengths[axis] / counts[axis];
    const top = Math.max(...profile);
    if (top <= 0) return NaN;
    const peaks: number[] = [];
    for (let i = 0; i < n; i++) {
        const prev = profile[(i - 1 + n) % n];
        const next = profile[(i + 1) % n];
        if (profile[i] > prev && profile[i] >= next
                && profile[i] >= 0.5 * top) {
            peaks.push(i);
        }
    }
    if (peaks.length < 2) return NaN;
    const gaps = [];
    for (let k = 1; k < peaks.length; k++) gaps.push(peaks[k] - peaks[k - 1]);
    gaps.sort((a, b) => a - b);
    const mid = gaps.length >> 1;
    const medianCells = gaps.length % 2
        ? gaps[mid] : (gaps[mid - 1] + gaps[mid]) / 2;
    return medianCells * h;
}

function extractProfile(slice: Slice, axis: 0 | 1): number[] {
    if (slice.meta.dims === 1) return Array.from(slice.magnitude);
    const [nx, ny] = slice.meta.counts;
    let best = 0;
    let bestIdx = 0;
    for (let i = 0; i < slice.magnitude.length; i++) {
        if (slice.magnitude[i] > best) {
            best = slice.magnitude[i];
            bestIdx = i;
        }
    }
    const iMax = Math.floor(bestIdx / ny);
    const jMax = bestIdx % ny;
    if (axis === 0) {
        return Array.from({ length: nx },
                          (_, i) => slice.magnitude[i * ny + jMax]);
    }
    return Array.from({ length: ny },
                      (_, j) => slice.magnitude[iMax * ny + j]);
}
