// Rasterize a flat field (x fastest, structural y pointing up) into an RGBA
// buffer at one pixel per element; the canvas scales it up with smoothing off.

import { FieldKind, colormapFor } from "./colormap.js";

export interface Raster {
  width: number;
  height: number;
  data: Uint8ClampedArray<ArrayBuffer>;
}

export function rasterize2d(dims: number[], values: number[], kind: FieldKind): Raster {
  const [nx, ny] = dims;
  if (dims.length !== 2 || values.length !== nx * ny) {
    throw new Error(`expected ${nx * ny} values for ${nx}x${ny}, got ${values.length}`);
  }
  const map = colormapFor(kind);
  const data = new Uint8ClampedArray(nx * ny * 4);
  for (let row = 0; row < ny; row++) {
    const iy = ny - 1 - row; // canvas rows grow downward
    for (let ix = 0; ix < nx; ix++) {
      const [r, g, b, a] = map(values[ix + nx * iy]);
      const o = (row * nx + ix) * 4;
      data[o] = r;
      data[o + 1] = g;
      data[o + 2] = b;
      data[o + 3] = a;
    }
  }
  return { width: nx, height: ny, data };
}
