// Dependency-free isometric voxel projection. Produces painter-ordered
// screen-space quads; the caller rasterizes them as canvas paths.
//
// Axes: structural x runs right, y up, z into the page toward the left.
// A voxel is shown when its magnitude clears the cull threshold, with
// opacity ramping from faint at the threshold to solid at full magnitude.

import { FieldKind, Rgba, colormapFor } from "./colormap.js";

const C = Math.sqrt(3) / 2; // cos 30deg
const S = 0.5; // sin 30deg
const H = 1.0; // vertical unit per y step

export interface Quad {
  points: [number, number][]; // 4 corners, screen space
  color: Rgba;
  alpha: number;
}

export interface VoxelScene {
  quads: Quad[];
  xRange: [number, number];
  yRange: [number, number];
}

export const DEFAULT_CULL = 0.3;

function project(x: number, y: number, z: number): [number, number] {
  return [(x - z) * C, (x + z) * S - y * H];
}

// visible faces point toward the camera at +(1,1,1); each lists its unit
// normal (grid steps) and a brightness factor
const FACES: { dx: number; dy: number; dz: number; shade: number; corners: number[][] }[] = [
  { dx: 0, dy: 1, dz: 0, shade: 1.0, corners: [[0, 1, 0], [1, 1, 0], [1, 1, 1], [0, 1, 1]] },
  { dx: 1, dy: 0, dz: 0, shade: 0.85, corners: [[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]] },
  { dx: 0, dy: 0, dz: 1, shade: 0.65, corners: [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]] },
];

export function voxelScene(
  dims: number[],
  values: number[],
  kind: FieldKind,
  cullBelow: number = DEFAULT_CULL,
): VoxelScene {
  const [nx, ny, nz] = dims;
  if (dims.length !== 3 || values.length !== nx * ny * nz) {
    throw new Error(`expected ${nx * ny * nz} values for ${nx}x${ny}x${nz}, got ${values.length}`);
  }
  const map = colormapFor(kind);
  const at = (ix: number, iy: number, iz: number) => values[ix + nx * (iy + ny * iz)];
  const shown = (ix: number, iy: number, iz: number) =>
    ix >= 0 && iy >= 0 && iz >= 0 && ix < nx && iy < ny && iz < nz &&
    Math.abs(at(ix, iy, iz)) >= cullBelow;

  const quads: Quad[] = [];
  // ascending x+y+z: nearer voxels draw later and overpaint
  for (let sum = 0; sum <= nx + ny + nz - 3; sum++) {
    for (let iz = 0; iz < nz; iz++) {
      for (let iy = 0; iy < ny; iy++) {
        const ix = sum - iy - iz;
        if (ix < 0 || ix >= nx || !shown(ix, iy, iz)) continue;
        const v = at(ix, iy, iz);
        const mag = Math.min(Math.abs(v), 1);
        const alpha = 0.35 + 0.65 * ((mag - cullBelow) / Math.max(1 - cullBelow, 1e-9));
        const base = map(v);
        for (const face of FACES) {
          if (shown(ix + face.dx, iy + face.dy, iz + face.dz)) continue; // hidden
          const color: Rgba = [
            Math.round(base[0] * face.shade),
            Math.round(base[1] * face.shade),
            Math.round(base[2] * face.shade),
            255,
          ];
          quads.push({
            points: face.corners.map(([cx, cy, cz]) =>
              project(ix + cx, iy + cy, iz + cz),
            ) as [number, number][],
            color,
            alpha: Math.min(Math.max(alpha, 0), 1),
          });
        }
      }
    }
  }

  // bounding box of the full grid, not just shown voxels: keeps the view
  // steady while sliders move material around
  const corners: [number, number][] = [];
  for (const x of [0, nx]) {
    for (const y of [0, ny]) {
      for (const z of [0, nz]) corners.push(project(x, y, z));
    }
  }
  const xs = corners.map((p) => p[0]);
  const ys = corners.map((p) => p[1]);
  return {
    quads,
    xRange: [Math.min(...xs), Math.max(...xs)],
    yRange: [Math.min(...ys), Math.max(...ys)],
  };
}
