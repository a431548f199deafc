import { basename, join } from "path";
import { writeFileSync } from "fs";
import { max, min } from "d3-array";

import { DiagnosticsSeries, interpolateAt, readDiagnostics, windowAverage }
    from "./diagnostics.js";
import { SERIES_COLORS, SvgCanvas } from "./svg.js";

export interface EnergyPlotOptions {
    /** averaging window applied to every non-reference run before plotting
     *  and differencing; 0 disables */
    window: number;
    outDir: string;
}

interface NamedSeries {
    label: string;
    t: number[];
    e: number[];
}

function load(runDir: string): NamedSeries {
    const d: DiagnosticsSeries = readDiagnostics(join(runDir, "diagnostics.csv"));
    return { label: basename(runDir), t: d.t, e: d.total };
}

/** Overlaid total-energy traces; the first run directory is the reference
 *  (typically the averaged model) and the others are window-averaged before
 *  display and differencing.  Returns the written file paths. */
export function plotEnergy(runDirs: string[], opts: EnergyPlotOptions): string[] {
    if (runDirs.length === 0) throw new RangeError("no run directories given");
    const reference = load(runDirs[0]);
    const others = runDirs.slice(1).map(load).map((s) => {
        if (opts.window > 0 && s.t.length >= 2
                && s.t[0] + opts.window <= s.t[s.t.length - 1]) {
            const w = windowAverage(s.t, s.e, opts.window);
            return { label: s.label, t: w.t, e: w.v };
        }
        return s;
    });
    const all = [reference, ...others];

    const canvas = new SvgCanvas();
    const tLo = min(all, (s) => s.t[0])!;
    const tHi = max(all, (s) => s.t[s.t.length - 1])!;
    const eLo = min(all, (s) => min(s.e)!)!;
    const eHi = max(all, (s) => max(s.e)!)!;
    const [x, y] = canvas.plotScales([tLo, tHi], [eLo, eHi]);
    canvas.title(opts.window > 0
        ? `total energy (window ${opts.window})` : "total energy");
    canvas.axes(x, y, "t", "E(t)");
    all.forEach((s, i) => {
        canvas.polyline(s.t.map(x), s.e.map(y),
                        SERIES_COLORS[i % SERIES_COLORS.length]);
    });
    canvas.legend(all.map((s, i) => ({
        label: s.label, color: SERIES_COLORS[i % SERIES_COLORS.length] })));
    const written: string[] = [];
    const energyPath = join(opts.outDir, "energy.svg");
    writeFileSync(energyPath, canvas.render());
    written.push(energyPath);

    if (others.length > 0) {
        const diffCanvas = new SvgCanvas();
        const diffs = others.map((s) => {
            const ref = interpolateAt(reference.t, reference.e, s.t);
            return { label: `|E_${s.label} - E_${reference.label}|`, t: s.t,
                     e: s.e.map((v, i) => Math.abs(v - ref[i])) };
        });
        const dHi = max(diffs, (s) => max(s.e)!)!;
        const [dx, dy] = diffCanvas.plotScales([tLo, tHi], [0, dHi]);
        diffCanvas.title("energy difference vs reference");
        diffCanvas.axes(dx, dy, "t", "|dE|");
        diffs.forEach((s, i) => {
            diffCanvas.polyline(s.t.map(dx), s.e.map(dy),
                                SERIES_COLORS[(i + 1) % SERIES_COLORS.length]);
        });
        diffCanvas.legend(diffs.map((s, i) => ({
            label: s.label,
            color: SERIES_COLORS[(i + 1) % SERIES_COLORS.length] })));
        const diffPath = join(opts.outDir, "energy_diff.svg");
        writeFileSync(diffPath, diffCanvas.render());
        written.push(diffPath);
    }
    return written;
}
