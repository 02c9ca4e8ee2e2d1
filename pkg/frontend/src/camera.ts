/**
 * World <-> screen mapping with pan and zoom.
 *
 * World coordinates are meters with y pointing up; screen coordinates are
 * canvas pixels with y pointing down. The camera stores the world point at
 * the viewport center and a scale in pixels per meter, so zooming never
 * drifts the anchor and panning is resolution independent.
 */

export interface Camera {
  cx: number;
  cy: number;
  scale: number;
}

export interface Viewport {
  width: number;
  height: number;
}

export const MIN_SCALE = 5;
export const MAX_SCALE = 20000;

export function worldToScreen(
  cam: Camera,
  view: Viewport,
  wx: number,
  wy: number,
): { x: number; y: number } {
  return {
    x: view.width / 2 + (wx - cam.cx) * cam.scale,
    y: view.height / 2 - (wy - cam.cy) * cam.scale,
  };
}

export function screenToWorld(
  cam: Camera,
  view: Viewport,
  sx: number,
  sy: number,
): { x: number; y: number } {
  return {
    x: cam.cx + (sx - view.width / 2) / cam.scale,
    y: cam.cy - (sy - view.height / 2) / cam.scale,
  };
}

/** Shift the view by a pixel delta (drag gesture: content follows pointer). */
export function panByPixels(cam: Camera, dx: number, dy: number): Camera {
  return {
    cx: cam.cx - dx / cam.scale,
    cy: cam.cy + dy / cam.scale,
    scale: cam.scale,
  };
}

/** Rescale around a screen anchor so the world point under it stays put. */
export function zoomAt(
  cam: Camera,
  view: Viewport,
  sx: number,
  sy: number,
  factor: number,
): Camera {
  const anchor = screenToWorld(cam, view, sx, sy);
  const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, cam.scale * factor));
  const ratio = cam.scale / scale;
  return {
    cx: anchor.x + (cam.cx - anchor.x) * ratio,
    cy: anchor.y + (cam.cy - anchor.y) * ratio,
    scale,
  };
}

/** Frame a point cloud with a pixel margin on every side. */
export function fitBounds(
  points: number[][],
  view: Viewport,
  marginPx = 32,
): Camera {
  if (points.length === 0) {
    return { cx: 0, cy: 0, scale: 100 };
  }
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const usableW = Math.max(view.width - 2 * marginPx, 1);
  const usableH = Math.max(view.height - 2 * marginPx, 1);
  const scale = Math.min(
    MAX_SCALE,
    Math.max(MIN_SCALE, Math.min(usableW / spanX, usableH / spanY)),
  );
  return { cx: (minX + maxX) / 2, cy: (minY + maxY) / 2, scale };
}
