import { ApiClient, ApiError } from "./api.js";
import { renderSeatMap } from "./seatmap.js";
import { updateStatusIndicator } from "./status.js";
import type { FrameReportView, RoomView } from "./types.js";

// Librarian workspace: import a frame, watch the run indicator, inspect the
// per-seat check/cross grid next to the original image, and steer the two
// confidence thresholds with what-if re-runs.

export interface LibrarianView {
    el: HTMLElement;
    uploadBytes(bytes: BodyInit): Promise<void>;
    rerunWithThresholds(): Promise<void>;
    refreshStatus(): Promise<void>;
    destroy(): void;
}

function banner(el: HTMLElement, message: string | null): void {
    const box = el.querySelector(".error-banner") as HTMLElement;
    box.textContent = message ?? "";
    box.style.display = message ? "block" : "none";
}

function subImageGrid(room: RoomView, report: FrameReportView, frameUrl: string): HTMLElement {
    const panel = document.createElement("div");
    panel.className = "subimage-grid";
    const bySeat = new Map(report.seats.map((s) => [s.seat_id, s]));
    for (const region of room.layout.regions) {
        const seat = bySeat.get(region.seat_id);
        if (!seat) continue;
        const cell = document.createElement("div");
        cell.className = `subimage-cell color-${seat.color}`;
        cell.dataset.seatId = String(region.seat_id);
        cell.dataset.glyph = seat.glyph;
        cell.style.left = `${region.x * 100}%`;
        cell.style.top = `${region.y * 100}%`;
        cell.style.width = `${region.w * 100}%`;
        cell.style.height = `${region.h * 100}%`;
        // show this seat's crop of the frame through the cell window
        cell.style.backgroundImage = `url(${frameUrl})`;
        cell.style.backgroundSize = `${100 / region.w}% ${100 / region.h}%`;
        const px = region.w < 1 ? (region.x / (1 - region.w)) * 100 : 0;
        const py = region.h < 1 ? (region.y / (1 - region.h)) * 100 : 0;
        cell.style.backgroundPosition = `${px}% ${py}%`;
        const glyph = document.createElement("span");
        glyph.className = "subimage-glyph";
        glyph.textContent = seat.glyph;
        cell.appendChild(glyph);
        panel.appendChild(cell);
    }
    return panel;
}

export function librarianView(api: ApiClient, roomId: string): LibrarianView {
    const el = document.createElement("div");
    el.className = "librarian-view";
    el.innerHTML = `
      <header>
        <h2>Room <span class="room-name"></span> — librarian</h2>
        <span class="status-indicator status-idle" data-status="idle">idle</span>
      </header>
      <div class="error-banner" style="display:none"></div>
      <div class="upload-row">
        <input type="file" accept="image/png,image/jpeg" class="frame-input">
        <button class="upload-button" type="button">Import and detect</button>
      </div>
      <div class="frame-row">
        <figure class="frame-panel">
          <img class="frame-image" alt="imported frame">
          <figcaption>imported frame</figcaption>
        </figure>
        <figure class="grid-panel">
          <div class="grid-host"></div>
          <figcaption>segmented sub-images (× = suspected occupancy)</figcaption>
        </figure>
      </div>
      <section class="threshold-panel">
        <h3>What-if thresholds</h3>
        <label>person ≥ <input type="range" class="tau-person" min="0" max="1" step="0.05">
          <span class="tau-person-value"></span></label>
        <label>objects ≥ <input type="range" class="tau-objects" min="0" max="1" step="0.05">
          <span class="tau-objects-value"></span></label>
        <button class="rerun-button" type="button">Re-run last frame</button>
      </section>
    `;
    (el.querySelector(".room-name") as HTMLElement).textContent = roomId;

    const statusEl = el.querySelector(".status-indicator") as HTMLElement;
    const gridHost = el.querySelector(".grid-host") as HTMLElement;
    const frameImage = el.querySelector(".frame-image") as HTMLImageElement;
    const tauPerson = el.querySelector(".tau-person") as HTMLInputElement;
    const tauObjects = el.querySelector(".tau-objects") as HTMLInputElement;
    const tauPersonValue = el.querySelector(".tau-person-value") as HTMLElement;
    const tauObjectsValue = el.querySelector(".tau-objects-value") as HTMLElement;

    let room: RoomView | null = null;
    let destroyed = false;

    const showThresholds = () => {
        tauPersonValue.textContent = Number(tauPerson.value).toFixed(2);
        tauObjectsValue.textContent = Number(tauObjects.value).toFixed(2);
    };
    tauPerson.addEventListener("input", showThresholds);
    tauObjects.addEventListener("input", showThresholds);

    const renderReport = (report: FrameReportView) => {
        if (!room) return;
        const url = `${api.lastFrameUrl(roomId)}?frame=${report.frame_id}`;
        frameImage.src = url;
        gridHost.replaceChildren(subImageGrid(room, report, url));
    };

    const refreshStatus = async () => {
        try {
            updateStatusIndicator(statusEl, await api.getStatus(roomId));
        } catch {
            // status is cosmetic; leave the last value on a blip
        }
    };

    const uploadBytes = async (bytes: BodyInit) => {
        banner(el, null);
        updateStatusIndicator(statusEl, { status: "in_progress", frame_id: null });
        try {
            const report = await api.ingestFrame(roomId, bytes);
            renderReport(report);
            updateStatusIndicator(statusEl, { status: "completed", frame_id: report.frame_id });
        } catch (err) {
            await refreshStatus();
            banner(el, `upload failed: ${err instanceof ApiError ? err.message : err}`);
        }
    };

    const rerunWithThresholds = async () => {
        banner(el, null);
        try {
            const report = await api.rerun(roomId, {
                personConf: Number(tauPerson.value),
                objectsConf: Number(tauObjects.value),
            });
            renderReport(report);
        } catch (err) {
            // previous grid stays; the operator only loses the what-if
            banner(el, `re-run failed: ${err instanceof ApiError ? err.message : err}`);
        }
    };

    (el.querySelector(".upload-button") as HTMLButtonElement).addEventListener("click", () => {
        const input = el.querySelector(".frame-input") as HTMLInputElement;
        const file = input.files?.[0];
        if (!file) {
            banner(el, "choose a PNG or JPEG first");
            return;
        }
        void uploadBytes(file);
    });
    (el.querySelector(".rerun-button") as HTMLButtonElement).addEventListener("click", () => {
        void rerunWithThresholds();
    });

    void (async () => {
        try {
            room = await api.getRoom(roomId);
            tauPerson.value = String(room.config.person_conf);
            tauObjects.value = String(room.config.objects_conf);
            showThresholds();
            await refreshStatus();
            if (destroyed) return;
            try {
                renderReport(await api.rerun(roomId, {}));
            } catch {
                // no frame ingested yet: the grid stays empty until an upload
            }
        } catch (err) {
            banner(el, `cannot load room: ${err instanceof ApiError ? err.message : err}`);
        }
    })();

    return {
        el,
        uploadBytes,
        rerunWithThresholds,
        refreshStatus,
        destroy: () => {
            destroyed = true;
        },
    };
}
