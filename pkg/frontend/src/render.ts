// 2D canvas renderer. Pure pass-through of snapshot data: link segments,
// ground, contact force arrows, CP/ZMP/support markers, reward kernel bars,
// trace strips, and the verdict / connection banners.

import { Snapshot } from "./protocol.js";
import { SessionView, TraceBuffer } from "./view.js";

export interface Camera {
    pxPerMeter: number;
    groundY: number;     // pixel row of z = 0
    centerX: number;     // pixel column of x = 0
}

export function defaultCamera(width: number, height: number): Camera {
    return { pxPerMeter: height / 2.2, groundY: height * 0.86,
             centerX: width * 0.5 };
}

export function worldToScreen(cam: Camera, x: number, z: number): [number, number] {
    return [cam.centerX + x * cam.pxPerMeter, cam.groundY - z * cam.pxPerMeter];
}

const COST_ORDER = [
    "odometry_velocity", "reference_configuration", "foot_position",
    "foot_orientation", "foot_placement_cp", "zmp_stability",
    "contact_balance", "ground_friction", "pelvis_momentum",
];

export function render(ctx: CanvasRenderingContext2D, view: SessionView,
                       width: number, height: number): void {
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, width, height);
    const cam = defaultCamera(width, height);
    drawGround(ctx, cam, width);

    const snap = view.snapshot;
    if (snap !== null && view.connection === "live") {
        drawScene(ctx, cam, snap);
        drawBars(ctx, snap, width);
        drawTrace(ctx, view.pitchTrace, width - 190, 10, "pitch", "#7fd0ff", 0.8);
        drawTrace(ctx, view.trackingTrace, width - 190, 64, "q err", "#ffd27f", 1.2);
        drawTrace(ctx, view.rewardTrace, width - 190, 118, "reward", "#9cff7f", 1.0);
        drawHud(ctx, view, snap);
        if (snap.verdict !== "none") {
            drawBanner(ctx, width, `terminated: ${snap.verdict}`, "#c0392b");
        } else if (snap.paused) {
            drawBanner(ctx, width, "paused", "#7f8c8d");
        }
    }
    if (view.connection !== "live") {
        drawBanner(ctx, width, view.connection === "closed"
            ? "session closed" : "reconnecting...", "#b9770e");
    }
    if (view.lastError) {
        ctx.fillStyle = "#ff8f8f";
        ctx.font = "12px monospace";
        ctx.fillText(`server: ${view.lastError}`, 12, height - 10);
    }
}

function drawGround(ctx: CanvasRenderingContext2D, cam: Camera, width: number): void {
    ctx.strokeStyle = "#3c4754";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(0, cam.groundY);
    ctx.lineTo(width, cam.groundY);
    ctx.stroke();
    ctx.strokeStyle = "#232b33";
    ctx.lineWidth = 1;
    for (let x = -4; x <= 4; x += 0.5) {
        const [sx, sy] = worldToScreen(cam, x, 0);
        ctx.beginPath();
        ctx.moveTo(sx, sy);
        ctx.lineTo(sx - 8, sy + 8);
        ctx.stroke();
    }
}

function drawScene(ctx: CanvasRenderingContext2D, cam: Camera, snap: Snapshot): void {
    // links
    ctx.lineCap = "round";
    for (const seg of snap.links) {
        ctx.strokeStyle = seg.name.startsWith("l_") ? "#6fb3e0"
            : seg.name.startsWith("r_") ? "#4a7aa5" : "#d5dde5";
        ctx.lineWidth = seg.name === "torso" ? 10 : 6;
        const [x1, y1] = worldToScreen(cam, seg.x1, seg.z1);
        const [x2, y2] = worldToScreen(cam, seg.x2, seg.z2);
        ctx.beginPath();
        ctx.moveTo(x1, y1);
        ctx.lineTo(x2, y2);
        ctx.stroke();
    }
    // contact forces
    for (const c of snap.contacts) {
        if (!c.active) continue;
        const [sx, sy] = worldToScreen(cam, c.x, c.z);
        const scale = 0.0008 * cam.pxPerMeter;
        ctx.strokeStyle = "#58d68d";
        ctx.lineWidth = 2;
        arrow(ctx, sx, sy, sx + c.fx * scale, sy - c.fz * scale);
    }
    // push arrows
    for (const p of snap.pushes) {
        const [sx, sy] = worldToScreen(cam, p.x, p.z);
        const len = 0.06 * Math.sqrt(p.magnitude) * cam.pxPerMeter * 0.1 + 18;
        const tipX = sx + Math.cos(p.angle) * len;
        const tipY = sy - Math.sin(p.angle) * len;
        ctx.strokeStyle = p.progress > 0 ? "#ff6b6b" : "#b06b6b";
        ctx.lineWidth = 4;
        arrow(ctx, sx - Math.cos(p.angle) * len, sy + Math.sin(p.angle) * len,
              tipX, tipY);
    }
    // balance markers on the ground line (x coordinates of ground points)
    marker(ctx, cam, snap.markers.cp[0], "#f4d03f", "cp");
    if (snap.markers.zmp !== null) {
        marker(ctx, cam, snap.markers.zmp[0], "#af7ac5", "zmp");
    }
    marker(ctx, cam, snap.markers.support[0], "#5dade2", "sp");
}

function marker(ctx: CanvasRenderingContext2D, cam: Camera, x: number,
                color: string, label: string): void {
    const [sx, sy] = worldToScreen(cam, x, 0);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(sx, sy, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.font = "10px monospace";
    ctx.fillText(label, sx - 8, sy + 18);
}

function arrow(ctx: CanvasRenderingContext2D, x1: number, y1: number,
               x2: number, y2: number): void {
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
    const a = Math.atan2(y2 - y1, x2 - x1);
    ctx.beginPath();
    ctx.moveTo(x2, y2);
    ctx.lineTo(x2 - 8 * Math.cos(a - 0.4), y2 - 8 * Math.sin(a - 0.4));
    ctx.moveTo(x2, y2);
    ctx.lineTo(x2 - 8 * Math.cos(a + 0.4), y2 - 8 * Math.sin(a + 0.4));
    ctx.stroke();
}

function drawBars(ctx: CanvasRenderingContext2D, snap: Snapshot,
                  width: number): void {
    const x0 = 12;
    let y = 16;
    ctx.font = "10px monospace";
    for (const name of COST_ORDER) {
        const k = snap.kernels[name] ?? 0;
        ctx.fillStyle = "#2c3742";
        ctx.fillRect(x0, y, 90, 8);
        ctx.fillStyle = k > 0.5 ? "#58d68d" : k > 0.2 ? "#f5b041" : "#ec7063";
        ctx.fillRect(x0, y, 90 * k, 8);
        ctx.fillStyle = "#aab7c4";
        ctx.fillText(name.slice(0, 18), x0 + 96, y + 8);
        y += 13;
    }
    ctx.fillStyle = "#d5dde5";
    ctx.fillText(`reward ${snap.reward.toFixed(3)}`, x0, y + 10);
}

function drawTrace(ctx: CanvasRenderingContext2D, trace: TraceBuffer,
                   x0: number, y0: number, label: string, color: string,
                   scale: number): void {
    const w = 180;
    const h = 44;
    ctx.fillStyle = "rgba(20, 26, 33, 0.85)";
    ctx.fillRect(x0, y0, w, h);
    const values = trace.values;
    if (values.length > 1) {
        ctx.strokeStyle = color;
        ctx.lineWidth = 1;
        ctx.beginPath();
        for (let i = 0; i < values.length; i++) {
            const px = x0 + (i / (trace.capacity - 1)) * w;
            const py = y0 + h / 2 - (values[i] / scale) * (h / 2);
            const clamped = Math.min(Math.max(py, y0), y0 + h);
            if (i === 0) ctx.moveTo(px, clamped);
            else ctx.lineTo(px, clamped);
        }
        ctx.stroke();
    }
    ctx.fillStyle = "#8795a3";
    ctx.font = "10px monospace";
    ctx.fillText(label, x0 + 4, y0 + 12);
}

function drawHud(ctx: CanvasRenderingContext2D, view: SessionView,
                 snap: Snapshot): void {
    ctx.fillStyle = "#8795a3";
    ctx.font = "12px monospace";
    const hello = view.hello;
    const line = `t=${snap.t.toFixed(2)}s  speed=${snap.speed.toFixed(2)}x  `
        + (hello ? `${hello.model} @ ${hello.checkpoint_hash.slice(0, 8)}` : "");
    ctx.fillText(line, 12, 150 + 13 * 9);
}

function drawBanner(ctx: CanvasRenderingContext2D, width: number,
                    text: string, color: string): void {
    ctx.fillStyle = color;
    ctx.fillRect(0, 0, width, 26);
    ctx.fillStyle = "#ffffff";
    ctx.font = "bold 14px monospace";
    ctx.fillText(text, width / 2 - text.length * 4, 18);
}
