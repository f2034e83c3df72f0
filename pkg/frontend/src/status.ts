import type { RunStatusView } from "./types.js";

// Button semantics: red while a detection is in progress, green when the
// last one completed.
const STATUS_CLASS: Record<string, string> = {
    idle: "status-idle",
    in_progress: "status-red",
    completed: "status-green",
    failed: "status-failed",
};

const STATUS_TEXT: Record<string, string> = {
    idle: "idle",
    in_progress: "detecting…",
    completed: "detection completed",
    failed: "detection failed",
};

export function renderStatusIndicator(view: RunStatusView): HTMLElement {
    const el = document.createElement("span");
    updateStatusIndicator(el, view);
    return el;
}

export function updateStatusIndicator(el: HTMLElement, view: RunStatusView): void {
    el.className = `status-indicator ${STATUS_CLASS[view.status] ?? "status-idle"}`;
    el.dataset.status = view.status;
    el.textContent = STATUS_TEXT[view.status] ?? view.status;
    if (view.frame_id) el.title = `frame ${view.frame_id}`;
}
