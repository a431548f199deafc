import { writeFileSync } from "fs";
import { contours } from "d3-contour";
import { scaleLinear, scaleSequential } from "d3-scale";
import { interpolateViridis } from "d3-scale-chromatic";
import { max } from "d3-array";

import { Slice, axisCoordinate } from "./sliceFile.js";
import { SvgCanvas, escapeXml } from "./svg.js";

export type SliceStyle = "surface" | "contour";

/** Render |u| of a slice file as a contour map or a shaded surface with axes
 *  in model units.  1D slices fall back to a line plot. */
export function renderSlice(slice: Slice, style: SliceStyle): string {
    if (slice.meta.dims === 1) return renderProfile(slice);
    if (slice.meta.dims !== 2) {
        throw new RangeError(`cannot render a ${slice.meta.dims}D payload; `
            + "plot a z=0 plane instead");
    }
    return style === "contour" ? renderContour(slice) : renderSurface(slice);
}

function renderProfile(slice: Slice): string {
    const n = slice.meta.counts[0];
    const xs = Array.from({ length: n }, (_, j) => axisCoordinate(slice.meta, 0, j));
    const vs = Array.from(slice.magnitude);
    const canvas = new SvgCanvas();
    const [x, y] = canvas.plotScales([xs[0], xs[n - 1]],
                                     [0, Math.max(...vs)]);
    canvas.title(`|u| at t=${slice.meta.t}`);
    canvas.axes(x, y, "x", "|u|");
    canvas.polyline(xs.map(x), vs.map(y), "#1f77b4");
    return canvas.render();
}

function renderContour(slice: Slice): string {
    const [nx, ny] = slice.meta.counts;
    // d3-contour indexes values[y * width + x]; our payload is row-major
    // with axis 0 (x) outermost, so transpose into its convention
    const values = new Float64Array(nx * ny);
    for (let i = 0; i < nx; i++) {
        for (let j = 0; j < ny; j++) {
            values[j * nx + i] = slice.magnitude[i * ny + j];
        }
    }
    const top = max(values)!;
    const thresholds = top > 0
        ? Array.from({ length: 9 }, (_, k) => (top * (k + 1)) / 10)
        : [0.5];  // all-zero payload: a single empty threshold set
    const polys = contours().size([nx, ny]).thresholds(thresholds)(
        Array.from(values));

    const canvas = new SvgCanvas(560, 560);
    const [x, y] = sliceScales(canvas, slice);
    // contour coordinates are in grid units; map them onto the plot box
    const sx = scaleLinear().domain([0, nx]).range([x(axisCoordinate(slice.meta, 0, 0)),
        x(axisCoordinate(slice.meta, 0, 0) + slice.meta.lengths[0])]);
    const sy = scaleLinear().domain([0, ny]).range([y(axisCoordinate(slice.meta, 1, 0)),
        y(axisCoordinate(slice.meta, 1, 0) + slice.meta.lengths[1])]);
    const color = scaleSequential(interpolateViridis).domain([0, Math.max(top, 1e-300)]);
    canvas.title(`|u(t=${slice.meta.t}, x, y)| contours`);
    canvas.axes(x, y, "x", "y");
    for (const poly of polys) {
        const d = poly.coordinates.map((rings) =>
            rings.map((ring) =>
                "M" + ring.map(([gx, gy]) =>
                    `${Math.round(sx(gx) * 10) / 10},${Math.round(sy(gy) * 10) / 10}`,
                ).join("L") + "Z",
            ).join("")).join("");
        if (d) {
            canvas.add(`<path d="${d}" fill="${color(poly.value)}" `
                + `fill-opacity="0.55" stroke="${color(poly.value)}" `
                + `fill-rule="evenodd"/>`);
        }
    }
    return canvas.render();
}

function renderSurface(slice: Slice): string {
    const [nx, ny] = slice.meta.counts;
    const top = max(slice.magnitude)!;
    const size = 640;
    const canvas = new SvgCanvas(size, size);
    canvas.title(`|u(t=${slice.meta.t}, x, y)| surface`);

    // orthographic projection of the height field, painter-sorted quads
    const cos30 = Math.cos(Math.PI / 6);
    const sin30 = Math.sin(Math.PI / 6);
    const heightScale = top > 0 ? 0.35 / top : 0.0;
    const project = (i: number, j: number, v: number): [number, number] => {
        const u = i / nx - 0.5;
        const w = j / ny - 0.5;
        const px = (u - w) * cos30;
        const py = (u + w) * sin30 - v * heightScale;
        return [size / 2 + px * (size * 0.62),
                size * 0.58 + py * (size * 0.62)];
    };
    const color = scaleSequential(interpolateViridis)
        .domain([0, Math.max(top, 1e-300)]);
    const quads: Array<{ depth: number; d: string; fill: string }> = [];
    const at = (i: number, j: number) =>
        slice.magnitude[(i % nx) * ny + (j % ny)];
    for (let i = 0; i < nx - 1; i++) {
        for (let j = 0; j < ny - 1; j++) {
            const corners: Array<[number, number]> = [
                project(i, j, at(i, j)),
                project(i + 1, j, at(i + 1, j)),
                project(i + 1, j + 1, at(i + 1, j + 1)),
                project(i, j + 1, at(i, j + 1)),
            ];
            const d = `M${corners.map(([a, b]) =>
                `${Math.round(a * 10) / 10},${Math.round(b * 10) / 10}`).join("L")}Z`;
            const value = (at(i, j) + at(i + 1, j) + at(i, j + 1)
                + at(i + 1, j + 1)) / 4;
            quads.push({ depth: i + j, d, fill: color(value) });
        }
    }
    quads.sort((a, b) => a.depth - b.depth);
    for (const q of quads) {
        canvas.add(`<path d="${q.d}" fill="${q.fill}" stroke="${q.fill}" `
            + `stroke-width="0.3"/>`);
    }
    canvas.add(`<text x="${size - 12}" y="${size - 12}" text-anchor="end" `
        + `font-size="11" font-family="sans-serif">`
        + escapeXml(`max |u| = ${top.toPrecision(4)}`) + "</text>");
    return canvas.render();
}

function sliceScales(canvas: SvgCanvas, slice: Slice) {
    const x0 = axisCoordinate(slice.meta, 0, 0);
    const y0 = axisCoordinate(slice.meta, 1, 0);
    return canvas.plotScales([x0, x0 + slice.meta.lengths[0]],
                             [y0, y0 + slice.meta.lengths[1]]);
}

export function writeSlicePlot(slice: Slice, style: SliceStyle,
                               outPath: string): string {
    writeFileSync(outPath, renderSlice(slice, style));
    return outPath;
}
