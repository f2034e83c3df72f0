import { ApiClient, AlertStreamFactory } from "./api.js";
import { LegendMode, renderSeatMap } from "./seatmap.js";
import { showToast } from "./toast.js";
import type { AlertEventView } from "./types.js";

// Student page: live seat map, announcements, alert toasts. The map polls
// the seats endpoint; alerts ride the event stream. On connection loss the
// last data stays visible behind a stale badge and polling keeps retrying.

export interface StudentViewOptions {
    pollIntervalMs?: number; // 0 disables the timer (tests drive refresh())
    alertStream?: AlertStreamFactory;
    legend?: LegendMode;
}

export interface StudentView {
    el: HTMLElement;
    refresh(): Promise<void>;
    stop(): void;
}

export function studentView(
    api: ApiClient,
    roomId: string,
    opts: StudentViewOptions = {},
): StudentView {
    const el = document.createElement("div");
    el.className = "student-view";
    el.innerHTML = `
      <header>
        <h2>Room <span class="room-name"></span> — seats</h2>
        <span class="stale-badge" style="display:none"></span>
        <label class="legend-toggle">
          <input type="checkbox" class="legend-swap"> swap blue/gray reading
        </label>
      </header>
      <div class="map-host"></div>
      <section class="announcements">
        <h3>Announcements</h3>
        <ul class="announcement-list"></ul>
      </section>
    `;
    (el.querySelector(".room-name") as HTMLElement).textContent = roomId;

    const mapHost = el.querySelector(".map-host") as HTMLElement;
    const staleBadge = el.querySelector(".stale-badge") as HTMLElement;
    const legendSwap = el.querySelector(".legend-swap") as HTMLInputElement;
    const announcementList = el.querySelector(".announcement-list") as HTMLUListElement;

    let columns = 4;
    let legend: LegendMode = opts.legend ?? "server";
    legendSwap.checked = legend === "swap-blue-gray";
    let lastSeats: Awaited<ReturnType<ApiClient["getSeats"]>> | null = null;
    let lastFetched: Date | null = null;

    void api
        .getRoom(roomId)
        .then((room) => {
            const xs = new Set(room.layout.regions.map((r) => r.x));
            columns = xs.size || columns;
        })
        .catch(() => undefined);

    const renderSeats = () => {
        if (lastSeats) mapHost.replaceChildren(renderSeatMap(lastSeats, { columns, legend }));
    };

    legendSwap.addEventListener("change", () => {
        legend = legendSwap.checked ? "swap-blue-gray" : "server";
        renderSeats();
    });

    const renderAnnouncements = (items: { id: number; title: string; body: string }[]) => {
        announcementList.replaceChildren(
            ...items.map((a) => {
                const li = document.createElement("li");
                li.dataset.announcementId = String(a.id);
                const title = document.createElement("strong");
                title.textContent = a.title;
                const body = document.createElement("span");
                body.textContent = a.body ? ` — ${a.body}` : "";
                li.append(title, body);
                return li;
            }),
        );
    };

    const refresh = async () => {
        try {
            const [seats, announcements] = await Promise.all([
                api.getSeats(roomId),
                api.listAnnouncements(),
            ]);
            lastSeats = seats;
            lastFetched = new Date();
            renderSeats();
            renderAnnouncements(announcements);
            staleBadge.style.display = "none";
        } catch {
            // keep showing the last map; flag it as stale and let the timer retry
            staleBadge.textContent = lastFetched
                ? `stale — last update ${lastFetched.toLocaleTimeString()}`
                : "no connection";
            staleBadge.style.display = "inline";
        }
    };

    const onAlert = (event: MessageEvent<string>) => {
        try {
            const alert = JSON.parse(event.data) as AlertEventView;
            showToast(`Room ${alert.room_id}: seat ${alert.seat_id} — suspected occupancy`);
        } catch {
            // malformed event: ignore rather than crash the stream
        }
    };
    const streamFactory =
        opts.alertStream ??
        ((room: string, handler: (e: MessageEvent<string>) => void) => {
            const source = new EventSource(api.alertStreamUrl(room));
            source.onmessage = handler;
            return () => source.close();
        });
    const unsubscribe = streamFactory(roomId, onAlert);

    const interval = opts.pollIntervalMs ?? 5000;
    const timer = interval > 0 ? setInterval(() => void refresh(), interval) : null;
    void refresh();

    return {
        el,
        refresh,
        stop: () => {
            if (timer) clearInterval(timer);
            unsubscribe();
        },
    };
}
