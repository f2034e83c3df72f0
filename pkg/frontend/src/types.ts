// Payload shapes mirroring the service API. The dashboard renders these
// verbatim: every color and glyph comes from the server, never from local
// state derivation.

export interface SeatView {
    seat_id: number;
    state: string;
    color: string;
    glyph: string;
    last_updated: number | null;
    person_confidence: number | null;
    object_confidence: number | null;
}

export interface ReportSeatView {
    seat_id: number;
    state: string;
    color: string;
    glyph: string;
    person_confidence: number | null;
    object_confidence: number | null;
    timestamp: number;
}

export interface FrameReportView {
    frame_id: string;
    room_id: string;
    seats: ReportSeatView[];
    classifier_invocations: number;
    timings: { detector_ms: number; classifier_ms: number };
    alerts?: AlertEventView[];
}

export interface RegionView {
    seat_id: number;
    x: number;
    y: number;
    w: number;
    h: number;
}

export interface RoomView {
    room_id: string;
    layout: { room_id: string; regions: RegionView[] };
    config: { person_conf: number; objects_conf: number; nms_iou: number; out_of_service: number[] };
    detector: string;
    classifier: string;
}

export type RunStatus = "idle" | "in_progress" | "completed" | "failed";

export interface RunStatusView {
    status: RunStatus;
    frame_id: string | null;
}

export interface AnnouncementView {
    id: number;
    title: string;
    body: string;
    created_at: number;
}

export interface AlertEventView {
    room_id: string;
    seat_id: number;
    from: string | null;
    to: string;
    frame_id: string;
    timestamp: number;
}
