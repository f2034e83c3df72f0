import type { SeatView, ReportSeatView } from "./types.js";

// The blue/gray wording of the legend is ambiguous ("not occupied" vs "not
// used"), so the map ships with a display-only swap toggle. Colors are still
// the server's tokens; the toggle only exchanges how two of them look.
export type LegendMode = "server" | "swap-blue-gray";

function displayColor(color: string, legend: LegendMode): string {
    if (legend === "swap-blue-gray") {
        if (color === "blue") return "gray";
        if (color === "gray") return "blue";
    }
    return color;
}

function tooltip(seat: SeatView | ReportSeatView): string {
    const parts = [`seat ${seat.seat_id}: ${seat.state}`];
    if (seat.person_confidence !== null) parts.push(`person ${seat.person_confidence.toFixed(2)}`);
    if (seat.object_confidence !== null) parts.push(`objects ${seat.object_confidence.toFixed(2)}`);
    const updated = "last_updated" in seat ? seat.last_updated : seat.timestamp;
    if (updated !== null && updated !== undefined) {
        parts.push(`updated ${new Date(updated * 1000).toLocaleTimeString()}`);
    }
    return parts.join(" · ");
}

export interface SeatMapOptions {
    columns?: number;
    legend?: LegendMode;
}

/** Grid of seat cells; color and glyph are rendered exactly as served. */
export function renderSeatMap(
    seats: Array<SeatView | ReportSeatView>,
    opts: SeatMapOptions = {},
): HTMLElement {
    const legend = opts.legend ?? "server";
    const columns = opts.columns ?? Math.ceil(Math.sqrt(seats.length));
    const grid = document.createElement("div");
    grid.className = "seat-map";
    grid.style.gridTemplateColumns = `repeat(${columns}, 1fr)`;
    for (const seat of seats) {
        const cell = document.createElement("div");
        const color = displayColor(seat.color, legend);
        cell.className = `seat-cell color-${color}`;
        cell.dataset.seatId = String(seat.seat_id);
        cell.dataset.color = seat.color; // server token, untouched by the legend toggle
        cell.dataset.glyph = seat.glyph;
        cell.title = tooltip(seat);
        const id = document.createElement("span");
        id.className = "seat-id";
        id.textContent = String(seat.seat_id);
        const glyph = document.createElement("span");
        glyph.className = "seat-glyph";
        glyph.textContent = seat.glyph;
        cell.append(id, glyph);
        grid.appendChild(cell);
    }
    return grid;
}
