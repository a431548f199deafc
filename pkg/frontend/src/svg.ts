import { scaleLinear, ScaleLinear } from "d3-scale";

/** Tiny SVG scene builder: enough for batch line charts, contour maps and
 *  painter-sorted surface quads without a DOM. */
export class SvgCanvas {
    readonly width: number;
    readonly height: number;
    readonly margin = { top: 28, right: 20, bottom: 42, left: 62 };
    private parts: string[] = [];

    constructor(width = 720, height = 480) {
        this.width = width;
        this.height = height;
    }

    get innerWidth(): number {
        return this.width - this.margin.left - this.margin.right;
    }

    get innerHeight(): number {
        return this.height - this.margin.top - this.margin.bottom;
    }

    add(fragment: string): void {
        this.parts.push(fragment);
    }

    title(text: string): void {
        this.add(`<text x="${this.width / 2}" y="18" text-anchor="middle" `
            + `font-size="14" font-family="sans-serif">${escapeXml(text)}</text>`);
    }

    axes(x: ScaleLinear<number, number>, y: ScaleLinear<number, number>,
         xLabel: string, yLabel: string): void {
        const { left, top } = this.margin;
        const bottom = top + this.innerHeight;
        const right = left + this.innerWidth;
        this.add(`<rect x="${left}" y="${top}" width="${this.innerWidth}" `
            + `height="${this.innerHeight}" fill="none" stroke="black"/>`);
        for (const tick of x.ticks(6)) {
            const px = x(tick);
            this.add(`<line x1="${px}" y1="${bottom}" x2="${px}" y2="${bottom + 5}" stroke="black"/>`);
            this.add(`<text x="${px}" y="${bottom + 18}" text-anchor="middle" `
                + `font-size="11" font-family="sans-serif">${fmt(tick)}</text>`);
        }
        for (const tick of y.ticks(6)) {
            const py = y(tick);
            this.add(`<line x1="${left - 5}" y1="${py}" x2="${left}" y2="${py}" stroke="black"/>`);
            this.add(`<text x="${left - 8}" y="${py + 4}" text-anchor="end" `
                + `font-size="11" font-family="sans-serif">${fmt(tick)}</text>`);
        }
        this.add(`<text x="${left + this.innerWidth / 2}" y="${this.height - 8}" `
            + `text-anchor="middle" font-size="12" font-family="sans-serif">${escapeXml(xLabel)}</text>`);
        this.add(`<text x="16" y="${top + this.innerHeight / 2}" text-anchor="middle" `
            + `font-size="12" font-family="sans-serif" `
            + `transform="rotate(-90 16 ${top + this.innerHeight / 2})">${escapeXml(yLabel)}</text>`);
    }

    plotScales(xDomain: [number, number], yDomain: [number, number]):
            [ScaleLinear<number, number>, ScaleLinear<number, number>] {
        const x = scaleLinear().domain(pad(xDomain)).range(
            [this.margin.left, this.margin.left + this.innerWidth]);
        const y = scaleLinear().domain(pad(yDomain)).range(
            [this.margin.top + this.innerHeight, this.margin.top]);
        return [x, y];
    }

    polyline(px: number[], py: number[], stroke: string, width = 1.5): void {
        const pts = px.map((x, i) => `${round2(x)},${round2(py[i])}`).join(" ");
        this.add(`<polyline points="${pts}" fill="none" stroke="${stroke}" `
            + `stroke-width="${width}"/>`);
    }

    legend(entries: Array<{ label: string; color: string }>): void {
        const x0 = this.margin.left + 10;
        entries.forEach((e, i) => {
            const y0 = this.margin.top + 14 + 16 * i;
            this.add(`<line x1="${x0}" y1="${y0}" x2="${x0 + 22}" y2="${y0}" `
                + `stroke="${e.color}" stroke-width="2"/>`);
            this.add(`<text x="${x0 + 28}" y="${y0 + 4}" font-size="11" `
                + `font-family="sans-serif">${escapeXml(e.label)}</text>`);
        });
    }

    render(): string {
        return `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" `
            + `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n`
            + `<rect width="${this.width}" height="${this.height}" fill="white"/>\n`
            + this.parts.join("\n") + "\n</svg>\n";
    }
}

function pad([lo, hi]: [number, number]): [number, number] {
    if (lo === hi) {
        const eps = Math.max(1e-12, Math.abs(lo) * 1e-3, 1e-3);
        return [lo - eps, hi + eps];
    }
    return [lo, hi];
}

function fmt(v: number): string {
    if (v === 0) return "0";
    const a = Math.abs(v);
    if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
    return String(Math.round(v * 1e6) / 1e6);
}

function round2(v: number): number {
    return Math.round(v * 100) / 100;
}

export function escapeXml(text: string): string {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;")
        .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                              "#ff7f0e", "#8c564b", "#17becf"];
