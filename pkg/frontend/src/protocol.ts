// Session protocol frames exchanged with the playground server.
// The client renders exclusively from validated snapshot frames; anything
// malformed is dropped with a console diagnostic and never reaches the scene.

export interface Hello {
    type: "hello";
    version: number;
    model: string;
    total_mass: number;
    checkpoint_hash: string;
    dt_policy: number;
    push_limits: { max_magnitude: number; max_duration: number };
    application_points: string[];
}

export interface LinkSegment {
    name: string;
    x1: number;
    z1: number;
    x2: number;
    z2: number;
}

export interface ContactPoint {
    x: number;
    z: number;
    fx: number;
    fz: number;
    active: boolean;
}

export interface ActivePush {
    angle: number;
    magnitude: number;
    progress: number;
    point: string;
    x: number;
    z: number;
}

export interface Snapshot {
    type: "snapshot";
    t: number;
    reward: number;
    costs: Record<string, number>;
    kernels: Record<string, number>;
    verdict: string;
    base: { x: number; z: number; pitch: number };
    links: LinkSegment[];
    contacts: ContactPoint[];
    markers: {
        cp: [number, number];
        zmp: [number, number] | null;
        support: [number, number];
    };
    pushes: ActivePush[];
    paused: boolean;
    speed: number;
}

export interface Ack {
    type: "ack";
    action: string;
}

export interface ErrorFrame {
    type: "error";
    message: string;
}

export interface Bye {
    type: "bye";
}

export type ServerFrame = Hello | Snapshot | Ack | ErrorFrame | Bye;

export interface PushCommand {
    type: "command";
    action: "push";
    angle: number;
    magnitude: number;
    duration: number;
    point: string;
}

export interface SimpleCommand {
    type: "command";
    action: "reset" | "pause" | "resume" | "bye";
}

export interface SpeedCommand {
    type: "command";
    action: "speed";
    factor: number;
}

export type Command = PushCommand | SimpleCommand | SpeedCommand;

const isNum = (v: unknown): v is number =>
    typeof v === "number" && Number.isFinite(v);

function isPair(v: unknown): v is [number, number] {
    return Array.isArray(v) && v.length === 2 && isNum(v[0]) && isNum(v[1]);
}

export function validateHello(obj: unknown): Hello | null {
    const o = obj as Hello;
    if (!o || o.type !== "hello" || !isNum(o.version)) return null;
    if (typeof o.checkpoint_hash !== "string") return null;
    if (typeof o.model !== "string" || !isNum(o.dt_policy)) return null;
    return o;
}

export function validateSnapshot(obj: unknown): Snapshot | null {
    const o = obj as Snapshot;
    if (!o || o.type !== "snapshot") return null;
    if (!isNum(o.t) || !isNum(o.reward)) return null;
    if (!o.base || !isNum(o.base.x) || !isNum(o.base.z) || !isNum(o.base.pitch)) {
        return null;
    }
    if (!Array.isArray(o.links) || !Array.isArray(o.contacts)
        || !Array.isArray(o.pushes)) return null;
    for (const seg of o.links) {
        if (!isNum(seg.x1) || !isNum(seg.z1) || !isNum(seg.x2) || !isNum(seg.z2)) {
            return null;
        }
    }
    if (!o.markers || !isPair(o.markers.cp) || !isPair(o.markers.support)) {
        return null;
    }
    if (o.markers.zmp !== null && !isPair(o.markers.zmp)) return null;
    if (typeof o.verdict !== "string") return null;
    if (!o.costs || typeof o.costs !== "object") return null;
    if (!o.kernels || typeof o.kernels !== "object") return null;
    return o;
}

export function parseFrame(raw: string): ServerFrame | null {
    let obj: unknown;
    try {
        obj = JSON.parse(raw);
    } catch {
        return null;
    }
    const t = (obj as { type?: string }).type;
    switch (t) {
        case "hello":
            return validateHello(obj);
        case "snapshot":
            return validateSnapshot(obj);
        case "ack": {
            const o = obj as Ack;
            return typeof o.action === "string" ? o : null;
        }
        case "error": {
            const o = obj as ErrorFrame;
            return typeof o.message === "string" ? o : null;
        }
        case "bye":
            return obj as Bye;
        default:
            return null;
    }
}
