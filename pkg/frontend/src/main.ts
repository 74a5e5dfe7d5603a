// Browser entry point: wires the socket client, the view, the canvas
// renderer, and the drag-to-push gesture together.
// Configuration via URL query: ?server=ws://host:port&trace=500

import { dragToPush } from "./input.js";
import { render } from "./render.js";
import { SessionClient } from "./socket.js";
import { SessionView } from "./view.js";

function main(): void {
    const params = new URLSearchParams(window.location.search);
    const server = params.get("server") ?? "ws://127.0.0.1:8765";
    const traceLen = Number(params.get("trace") ?? "500");

    const canvas = document.getElementById("scene") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("canvas 2d context unavailable");

    const view = new SessionView(traceLen);
    const client = new SessionClient(server, view);
    client.connect();

    // drag on the canvas applies a push at the pelvis
    let dragStart: [number, number] | null = null;
    canvas.addEventListener("mousedown", (e) => {
        dragStart = [e.offsetX, e.offsetY];
    });
    canvas.addEventListener("mouseup", (e) => {
        if (dragStart === null) return;
        const maxN = view.hello?.push_limits.max_magnitude ?? 2000;
        const push = dragToPush(dragStart[0], dragStart[1],
                                e.offsetX, e.offsetY, maxN);
        dragStart = null;
        if (push !== null) {
            client.sendPush(push.angle, push.magnitude);
        }
    });

    const hook = (id: string, fn: () => void) =>
        document.getElementById(id)?.addEventListener("click", fn);
    hook("reset", () => client.send({ type: "command", action: "reset" }));
    hook("pause", () => client.send({ type: "command", action: "pause" }));
    hook("resume", () => client.send({ type: "command", action: "resume" }));
    hook("slower", () => client.send({ type: "command", action: "speed",
                                       factor: 0.25 }));
    hook("faster", () => client.send({ type: "command", action: "speed",
                                       factor: 1.0 }));

    const loop = () => {
        render(ctx, view, canvas.width, canvas.height);
        requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
}

main();
