// Drag gesture -> push command mapping.
// The drag vector in screen pixels maps to a world-frame push direction
// (screen y points down, world z points up) and a magnitude proportional to
// the drag length, clamped to the server's advertised limits.

export interface PushParams {
    angle: number;
    magnitude: number;
}

export const NEWTONS_PER_PIXEL = 4.0;

export function dragToPush(startX: number, startY: number,
                           endX: number, endY: number,
                           maxMagnitude: number,
                           newtonsPerPixel = NEWTONS_PER_PIXEL): PushParams | null {
    const dx = endX - startX;
    const dz = -(endY - startY);   // screen y is inverted
    const pixels = Math.hypot(dx, dz);
    if (pixels < 3) {
        return null;  // too small to be a deliberate gesture
    }
    const angle = Math.atan2(dz, dx);
    const magnitude = Math.min(pixels * newtonsPerPixel, maxMagnitude);
    return { angle, magnitude };
}
