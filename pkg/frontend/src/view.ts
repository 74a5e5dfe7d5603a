// Client-side session state: the latest validated snapshot, bounded trace
// buffers for the small time-series plots, and pending-command bookkeeping.
// No physics happens here: every rendered number originated in a frame.

import { Command, Hello, ServerFrame, Snapshot, parseFrame } from "./protocol.js";

export type ConnectionState = "connecting" | "live" | "reconnecting" | "closed";

export class TraceBuffer {
    readonly capacity: number;
    private data: number[] = [];

    constructor(capacity: number) {
        this.capacity = capacity;
    }

    push(value: number): void {
        this.data.push(value);
        if (this.data.length > this.capacity) {
            this.data.splice(0, this.data.length - this.capacity);
        }
    }

    get values(): readonly number[] {
        return this.data;
    }

    get length(): number {
        return this.data.length;
    }
}

export class SessionView {
    hello: Hello | null = null;
    snapshot: Snapshot | null = null;
    connection: ConnectionState = "connecting";
    lastError: string | null = null;
    droppedFrames = 0;
    framesSeen = 0;
    acks: string[] = [];
    pendingCommands: Command[] = [];

    readonly pitchTrace: TraceBuffer;
    readonly trackingTrace: TraceBuffer;
    readonly rewardTrace: TraceBuffer;

    constructor(traceCapacity = 500) {
        this.pitchTrace = new TraceBuffer(traceCapacity);
        this.trackingTrace = new TraceBuffer(traceCapacity);
        this.rewardTrace = new TraceBuffer(traceCapacity);
    }

    /** Ingest one raw frame; returns the parsed frame or null if dropped. */
    ingest(raw: string): ServerFrame | null {
        const frame = parseFrame(raw);
        if (frame === null) {
            this.droppedFrames += 1;
            console.warn("playground: dropped malformed frame");
            return null;
        }
        this.framesSeen += 1;
        switch (frame.type) {
            case "hello":
                this.hello = frame;
                this.connection = "live";
                break;
            case "snapshot":
                this.snapshot = frame;
                this.pitchTrace.push(frame.base.pitch);
                this.trackingTrace.push(frame.costs["reference_configuration"] ?? 0);
                this.rewardTrace.push(frame.reward);
                break;
            case "ack":
                this.acks.push(frame.action);
                if (this.acks.length > 32) this.acks.shift();
                this.pendingCommands = this.pendingCommands.filter(
                    (c) => c.action !== frame.action);
                break;
            case "error":
                this.lastError = frame.message;
                break;
            case "bye":
                this.connection = "closed";
                break;
        }
        return frame;
    }

    noteCommandSent(cmd: Command): void {
        this.pendingCommands.push(cmd);
        if (this.pendingCommands.length > 32) this.pendingCommands.shift();
    }

    onDisconnect(): void {
        if (this.connection !== "closed") {
            this.connection = "reconnecting";
        }
    }
}
