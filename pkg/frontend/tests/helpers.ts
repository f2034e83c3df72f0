import { ApiClient } from "../src/api.js";
import type {
    AnnouncementView,
    FrameReportView,
    RoomView,
    RunStatusView,
    SeatView,
} from "../src/types.js";

import roomFixture from "./fixtures/room.json";
import seatsFig20a from "./fixtures/seats_fig20a.json";
import seatsMixed from "./fixtures/seats_mixed.json";
import ingestReport from "./fixtures/ingest_report.json";
import rerunDefault from "./fixtures/rerun_default.json";
import rerunStrict from "./fixtures/rerun_strict.json";
import announcements from "./fixtures/announcements.json";
import alertEvent from "./fixtures/alert_event.json";

export const fixtures = {
    room: roomFixture as unknown as RoomView,
    seatsFig20a: seatsFig20a as unknown as SeatView[],
    seatsMixed: seatsMixed as unknown as SeatView[],
    ingestReport: ingestReport as unknown as FrameReportView,
    rerunDefault: rerunDefault as unknown as FrameReportView,
    rerunStrict: rerunStrict as unknown as FrameReportView,
    announcements: announcements as unknown as AnnouncementView[],
    alertEvent,
};

export interface FakeApiBehavior {
    seats?: () => Promise<SeatView[]>;
    status?: () => Promise<RunStatusView>;
    ingest?: () => Promise<FrameReportView>;
    rerun?: (thresholds: { personConf?: number; objectsConf?: number }) => Promise<FrameReportView>;
    announcements?: () => Promise<AnnouncementView[]>;
}

/** ApiClient test double returning fixture payloads; no network involved. */
export function fakeApi(behavior: FakeApiBehavior = {}): ApiClient {
    const api = new ApiClient("http://fixture");
    api.getRoom = async () => fixtures.room;
    api.listRooms = async () => [fixtures.room];
    api.getSeats = behavior.seats ?? (async () => fixtures.seatsFig20a);
    api.getStatus = behavior.status ?? (async () => ({ status: "completed", frame_id: "f" }));
    api.ingestFrame = behavior.ingest
        ? async () => behavior.ingest!()
        : async () => fixtures.ingestReport;
    api.rerun = behavior.rerun
        ? async (_room, thresholds) => behavior.rerun!(thresholds)
        : async () => fixtures.rerunDefault;
    api.listAnnouncements = behavior.announcements ?? (async () => fixtures.announcements);
    return api;
}

export function flush(): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, 0));
}

export function cells(el: HTMLElement, selector = ".seat-cell"): HTMLElement[] {
    return Array.from(el.querySelectorAll(selector));
}
