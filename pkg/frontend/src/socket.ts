// Websocket client with automatic reconnects.  The socket factory is
// injectable so tests can drive the client with a scripted fake.

import { Command } from "./protocol.js";
import { SessionView } from "./view.js";

export interface SocketLike {
    send(data: string): void;
    close(): void;
    onopen: (() => void) | null;
    onmessage: ((event: { data: string }) => void) | null;
    onclose: (() => void) | null;
    onerror: ((event: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) =>
    new WebSocket(url) as unknown as SocketLike;

export class SessionClient {
    readonly url: string;
    readonly view: SessionView;
    private factory: SocketFactory;
    private socket: SocketLike | null = null;
    private reconnectDelayMs: number;
    private stopped = false;
    private timer: ReturnType<typeof setTimeout> | null = null;

    constructor(url: string, view: SessionView,
                factory: SocketFactory = defaultFactory,
                reconnectDelayMs = 1000) {
        this.url = url;
        this.view = view;
        this.factory = factory;
        this.reconnectDelayMs = reconnectDelayMs;
    }

    connect(): void {
        this.stopped = false;
        this.open();
    }

    private open(): void {
        const sock = this.factory(this.url);
        this.socket = sock;
        sock.onopen = () => {
            this.view.connection = "live";
        };
        sock.onmessage = (event) => {
            this.view.ingest(event.data);
        };
        sock.onerror = () => {
            // the close handler performs the actual recovery
        };
        sock.onclose = () => {
            this.socket = null;
            if (this.stopped) return;
            this.view.onDisconnect();
            this.timer = setTimeout(() => this.open(), this.reconnectDelayMs);
        };
    }

    send(cmd: Command): boolean {
        if (this.socket === null || this.view.connection !== "live") {
            return false;
        }
        this.socket.send(JSON.stringify(cmd));
        this.view.noteCommandSent(cmd);
        return true;
    }

    sendPush(angle: number, magnitude: number, duration = 0.4,
             point = "pelvis"): boolean {
        const limits = this.view.hello?.push_limits;
        if (limits) {
            magnitude = Math.min(Math.max(magnitude, 0), limits.max_magnitude);
            duration = Math.min(Math.max(duration, 0.05), limits.max_duration);
        }
        return this.send({ type: "command", action: "push", angle, magnitude,
                           duration, point });
    }

    close(): void {
        this.stopped = true;
        if (this.timer !== null) clearTimeout(this.timer);
        this.socket?.close();
        this.view.connection = "closed";
    }
}
