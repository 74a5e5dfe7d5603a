import { describe, expect, it } from "vitest";

import { Snapshot } from "./protocol.js";
import { SessionView } from "./view.js";

export function makeSnapshot(t: number, over: Partial<Snapshot> = {}): string {
    const snap: Snapshot = {
        type: "snapshot",
        t,
        reward: 0.95,
        costs: { reference_configuration: 0.05 },
        kernels: { reference_configuration: 0.99 },
        verdict: "none",
        base: { x: 0.0, z: 0.95, pitch: 0.01 },
        links: [{ name: "torso", x1: 0, z1: 0.95, x2: 0, z2: 1.65 }],
        contacts: [{ x: 0.1, z: 0, fx: 1.0, fz: 290.0, active: true }],
        markers: { cp: [0.02, 0], zmp: [0.01, 0], support: [0.0, 0] },
        pushes: [],
        paused: false,
        speed: 1.0,
        ...over,
    };
    return JSON.stringify(snap);
}

const HELLO = JSON.stringify({
    type: "hello", version: 1, model: "planar-biped", total_mass: 60,
    checkpoint_hash: "abc123", dt_policy: 0.04,
    push_limits: { max_magnitude: 2000, max_duration: 2 },
    application_points: ["pelvis"],
});

describe("SessionView", () => {
    it("stores hello metadata and goes live", () => {
        const view = new SessionView();
        view.ingest(HELLO);
        expect(view.hello?.model).toBe("planar-biped");
        expect(view.hello?.checkpoint_hash).toBe("abc123");
        expect(view.connection).toBe("live");
    });

    it("renders only validated frames: malformed input is dropped", () => {
        const view = new SessionView();
        view.ingest(HELLO);
        expect(view.ingest("not json at all")).toBeNull();
        expect(view.ingest(JSON.stringify({ type: "snapshot" }))).toBeNull();
        expect(view.ingest(JSON.stringify({ type: "mystery" }))).toBeNull();
        expect(view.droppedFrames).toBe(3);
        expect(view.snapshot).toBeNull();  // nothing invalid reached the scene
        expect(view.ingest(makeSnapshot(0.04))).not.toBeNull();
        expect(view.snapshot?.t).toBe(0.04);
    });

    it("keeps trace buffers bounded over a 5-minute stream", () => {
        // 5 min at 25 Hz = 7500 snapshots; buffers must stay at capacity
        const view = new SessionView(500);
        view.ingest(HELLO);
        for (let i = 0; i < 7500; i++) {
            view.ingest(makeSnapshot(0.04 * (i + 1),
                                     { reward: Math.random() }));
        }
        expect(view.framesSeen).toBe(7501);
        expect(view.pitchTrace.length).toBe(500);
        expect(view.trackingTrace.length).toBe(500);
        expect(view.rewardTrace.length).toBe(500);
        expect(view.acks.length).toBeLessThanOrEqual(32);
        expect(view.pendingCommands.length).toBeLessThanOrEqual(32);
    });

    it("tracks the newest snapshot values verbatim (no client physics)", () => {
        const view = new SessionView();
        view.ingest(HELLO);
        view.ingest(makeSnapshot(1.0, {
            base: { x: 0.3, z: 0.8, pitch: -0.2 },
            markers: { cp: [0.5, 0], zmp: null, support: [0.1, 0] },
        }));
        expect(view.snapshot?.base.x).toBe(0.3);
        expect(view.snapshot?.markers.zmp).toBeNull();
        expect(view.snapshot?.markers.cp[0]).toBe(0.5);
        expect(view.pitchTrace.values.at(-1)).toBe(-0.2);
    });

    it("surfaces server error frames inline", () => {
        const view = new SessionView();
        view.ingest(JSON.stringify({ type: "error", message: "push: paused" }));
        expect(view.lastError).toBe("push: paused");
    });

    it("acks clear matching pending commands", () => {
        const view = new SessionView();
        view.noteCommandSent({ type: "command", action: "push", angle: 0,
                               magnitude: 10, duration: 0.4, point: "pelvis" });
        view.noteCommandSent({ type: "command", action: "reset" });
        view.ingest(JSON.stringify({ type: "ack", action: "push" }));
        expect(view.pendingCommands.map((c) => c.action)).toEqual(["reset"]);
    });
});
