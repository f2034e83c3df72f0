import type {
    AnnouncementView,
    FrameReportView,
    RoomView,
    RunStatusView,
    SeatView,
} from "./types.js";

export class ApiError extends Error {
    constructor(message: string, public status: number, public code?: string) {
        super(message);
    }
}

/** Thin typed client over the service HTTP API. */
export class ApiClient {
    constructor(
        private base: string = "",
        private fetchFn: typeof fetch = (...args) => fetch(...args),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        let resp: Response;
        try {
            resp = await this.fetchFn(this.base + path, init);
        } catch (err) {
            throw new ApiError(`connection failed: ${err}`, 0);
        }
        if (!resp.ok) {
            let message = `${resp.status}`;
            let code: string | undefined;
            try {
                const body = await resp.json();
                message = body.message ?? message;
                code = body.code;
            } catch {
                // non-JSON error body; keep the status text
            }
            throw new ApiError(message, resp.status, code);
        }
        return (await resp.json()) as T;
    }

    listRooms(): Promise<RoomView[]> {
        return this.request("/rooms");
    }

    getRoom(roomId: string): Promise<RoomView> {
        return this.request(`/rooms/${roomId}`);
    }

    getSeats(roomId: string): Promise<SeatView[]> {
        return this.request(`/rooms/${roomId}/seats`);
    }

    getStatus(roomId: string): Promise<RunStatusView> {
        return this.request(`/rooms/${roomId}/status`);
    }

    ingestFrame(roomId: string, bytes: BodyInit): Promise<FrameReportView> {
        return this.request(`/rooms/${roomId}/frames`, {
            method: "POST",
            body: bytes,
            headers: { "content-type": "application/octet-stream" },
        });
    }

    rerun(roomId: string, thresholds: { personConf?: number; objectsConf?: number }): Promise<FrameReportView> {
        const params = new URLSearchParams();
        if (thresholds.personConf !== undefined) params.set("person_conf", String(thresholds.personConf));
        if (thresholds.objectsConf !== undefined) params.set("objects_conf", String(thresholds.objectsConf));
        const query = params.toString();
        return this.request(`/rooms/${roomId}/rerun${query ? "?" + query : ""}`, { method: "POST" });
    }

    listAnnouncements(): Promise<AnnouncementView[]> {
        return this.request("/announcements");
    }

    lastFrameUrl(roomId: string): string {
        return `${this.base}/rooms/${roomId}/frames/last`;
    }

    annotatedFrameUrl(roomId: string): string {
        return `${this.base}/rooms/${roomId}/frames/last/annotated`;
    }

    alertStreamUrl(roomId: string): string {
        return `${this.base}/rooms/${roomId}/alerts`;
    }
}

export type AlertHandler = (event: MessageEvent<string>) => void;
export type AlertStreamFactory = (roomId: string, onEvent: AlertHandler) => () => void;

/** Default alert stream: a browser EventSource on the SSE endpoint. */
export function eventSourceAlertStream(api: ApiClient): AlertStreamFactory {
    return (roomId, onEvent) => {
        const source = new EventSource(api.alertStreamUrl(roomId));
        source.onmessage = onEvent;
        return () => source.close();
    };
}
