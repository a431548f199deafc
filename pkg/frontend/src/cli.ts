#!/usr/bin/env node
/** Batch figure renderer for solver run directories.
 *
 *  Usage:
 *    xnls-plots energy --out DIR [--window W] RUN_DIR [RUN_DIR...]
 *    xnls-plots slice  --out DIR [--style surface|contour] SLICE_FILE...
 *    xnls-plots peaks  [--axis 0|1] SLICE_FILE...
 *
 *  Consumes only the solver's documented outputs (diagnostics CSV and slice
 *  pairs); nothing is recomputed from the physics.
 */

import { basename, join } from "path";
import { mkdirSync } from "fs";

import { plotEnergy } from "./energyPlot.js";
import { readSlice, FormatError } from "./sliceFile.js";
import { SchemaError } from "./diagnostics.js";
import { writeSlicePlot, SliceStyle } from "./slicePlot.js";
import { measurePeakSpacing } from "./peaks.js";

interface Parsed {
    verb: string;
    positional: string[];
    options: Map<string, string>;
}

function parseArgs(argv: string[]): Parsed {
    if (argv.length === 0) throw new UsageError("missing verb");
    const [verb, ...rest] = argv;
    const positional: string[] = [];
    const options = new Map<string, string>();
    for (let i = 0; i < rest.length; i++) {
        const arg = rest[i];
        if (arg.startsWith("--")) {
            const value = rest[i + 1];
            if (value === undefined) throw new UsageError(`${arg} needs a value`);
            options.set(arg.slice(2), value);
            i++;
        } else {
            positional.push(arg);
        }
    }
    return { verb, positional, options };
}

class UsageError extends Error {}

export function main(argv: string[]): number {
    let parsed: Parsed;
    try {
        parsed = parseArgs(argv);
    } catch (err) {
        console.error(String(err));
        return 2;
    }
    try {
        switch (parsed.verb) {
            case "energy": {
                if (parsed.positional.length === 0) {
                    throw new UsageError("energy needs at least one run dir");
                }
                const outDir = parsed.options.get("out") ?? ".";
                mkdirSync(outDir, { recursive: true });
                const window = Number(parsed.options.get("window") ?? "0");
                const written = plotEnergy(parsed.positional,
                                           { window, outDir });
                for (const p of written) console.log(p);
                return 0;
            }
            case "slice": {
                if (parsed.positional.length === 0) {
                    throw new UsageError("slice needs at least one slice file");
                }
                const outDir = parsed.options.get("out") ?? ".";
                mkdirSync(outDir, { recursive: true });
                const style = (parsed.options.get("style") ?? "surface") as SliceStyle;
                if (style !== "surface" && style !== "contour") {
                    throw new UsageError(`unknown style '${style}'`);
                }
                for (const file of parsed.positional) {
                    const slice = readSlice(file);
                    const name = basename(file).replace(/\.(bin|txt)$/, "");
                    const out = join(outDir, `${name}_${style}.svg`);
                    writeSlicePlot(slice, style, out);
                    console.log(out);
                }
                return 0;
            }
            case "peaks": {
                const axis = Number(parsed.options.get("axis") ?? "0") as 0 | 1;
                for (const file of parsed.positional) {
                    const spacing = measurePeakSpacing(readSlice(file), axis);
                    console.log(`${file}: peak spacing ${spacing}`);
                }
                return 0;
            }
            default:
                throw new UsageError(`unknown verb '${parsed.verb}'`);
        }
    } catch (err) {
        if (err instanceof UsageError) {
            console.error(String(err));
            return 2;
        }
        if (err instanceof FormatError || err instanceof SchemaError
                || (err as NodeJS.ErrnoException).code === "ENOENT") {
            console.error(String(err));
            return 3;
        }
        throw err;
    }
}

if (process.argv[1] && import.meta.url.endsWith(basename(process.argv[1]))) {
    process.exit(main(process.argv.slice(2)));
}
