// UI state: parameters always clamped to the served bounds, responses cached
// by (params, mirror, field kind) so revisiting a view needs no request.

import { Meta, PredictResponse } from "./api.js";
import { FieldKind } from "./colormap.js";

export function clampToSpec(meta: Meta, values: number[]): number[] {
  return meta.params.map((spec, i) => {
    const v = values[i] ?? spec.low;
    if (Number.isNaN(v)) return spec.low;
    return Math.min(Math.max(v, spec.low), spec.high);
  });
}

export function cacheKey(params: number[], mirror: boolean, kind: string): string {
  return JSON.stringify([params, mirror, kind]);
}

export class UiStore {
  meta: Meta | null = null;
  params: number[] = [];
  kind: FieldKind = "density";
  mirror = false;
  private cache = new Map<string, PredictResponse>();
  private order: string[] = [];
  private capacity: number;

  constructor(capacity = 64) {
    this.capacity = capacity;
  }

  setMeta(meta: Meta): void {
    this.meta = meta;
    // midpoint start so every slider has room to move both ways
    this.params = meta.params.map((s) => (s.low + s.high) / 2);
    if (!meta.fields.includes(this.kind)) {
      this.kind = meta.fields[0] as FieldKind;
    }
    this.cache.clear();
    this.order = [];
  }

  setParam(index: number, value: number): void {
    if (!this.meta) throw new Error("parameters not loaded yet");
    const next = this.params.slice();
    next[index] = value;
    this.params = clampToSpec(this.meta, next);
  }

  key(): string {
    return cacheKey(this.params, this.mirror, this.kind);
  }

  cached(): PredictResponse | undefined {
    return this.cache.get(this.key());
  }

  remember(response: PredictResponse): void {
    const key = this.key();
    if (!this.cache.has(key)) {
      this.order.push(key);
      if (this.order.length > this.capacity) {
        const evict = this.order.shift();
        if (evict !== undefined) this.cache.delete(evict);
      }
    }
    this.cache.set(key, response);
  }

  mirrorAllowed(): boolean {
    return this.meta !== null && this.meta.dims.length === 3;
  }
}
