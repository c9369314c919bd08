// Field coloring conventions: density is grayscale with solid = dark,
// von Mises stress uses a sequential ramp, tension/compression a diverging
// ramp centered at zero. Combined views color like their stress component.

export type Rgba = [number, number, number, number];

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function clamp01(t: number): number {
  return t < 0 ? 0 : t > 1 ? 1 : t;
}

/** density in [0, 1]: 0 = void = white, 1 = solid = near-black */
export function grayscale(t: number): Rgba {
  const v = Math.round(lerp(255, 16, clamp01(t)));
  return [v, v, v, 255];
}

/** magnitude in [0, 1]: pale yellow through orange to deep red */
export function sequential(t: number): Rgba {
  const s = clamp01(t);
  const stops: Rgba[] = [
    [255, 252, 212, 255],
    [254, 178, 76, 255],
    [189, 30, 30, 255],
  ];
  const x = s * (stops.length - 1);
  const i = Math.min(Math.floor(x), stops.length - 2);
  const f = x - i;
  const [a, b] = [stops[i], stops[i + 1]];
  return [
    Math.round(lerp(a[0], b[0], f)),
    Math.round(lerp(a[1], b[1], f)),
    Math.round(lerp(a[2], b[2], f)),
    255,
  ];
}

/** signed value in [-1, 1]: blue (compression) - white (0) - red (tension) */
export function diverging(t: number): Rgba {
  const s = Math.max(-1, Math.min(1, t));
  const neg: Rgba = [33, 102, 172, 255];
  const mid: Rgba = [247, 247, 247, 255];
  const pos: Rgba = [178, 24, 43, 255];
  const [from, to, f] = s < 0 ? [mid, neg, -s] : [mid, pos, s];
  return [
    Math.round(lerp(from[0], to[0], f)),
    Math.round(lerp(from[1], to[1], f)),
    Math.round(lerp(from[2], to[2], f)),
    255,
  ];
}

export type FieldKind = "density" | "vm" | "tc" | "combined_vm" | "combined_tc";

export function colormapFor(kind: FieldKind): (t: number) => Rgba {
  switch (kind) {
    case "density":
      return grayscale;
    case "vm":
    case "combined_vm":
      return sequential;
    case "tc":
    case "combined_tc":
      return diverging;
  }
}

/** Data range the colorbar endpoints must show for a field kind. */
export function colorRange(kind: FieldKind): [number, number] {
  return kind === "tc" || kind === "combined_tc" ? [-1, 1] : [0, 1];
}
