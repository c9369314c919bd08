// Page wiring: build sliders from /meta, debounce slider motion into predict
// calls (latest response wins), and paint the returned field on a canvas.

import { ApiError, FieldResult, fetchMeta, fetchPredict, PredictResponse } from "./api.js";
import { colorRange, colormapFor, FieldKind } from "./colormap.js";
import { rasterize2d } from "./render2d.js";
import { RequestScheduler } from "./scheduler.js";
import { UiStore } from "./state.js";
import { voxelScene } from "./render3d.js";

const BASE = (window as { TOPOFORM_BASE?: string }).TOPOFORM_BASE ?? "";
const store = new UiStore();
const scheduler = new RequestScheduler<PredictResponse>(150);

const el = {
  sliders: document.getElementById("sliders") as HTMLDivElement,
  fields: document.getElementById("fields") as HTMLDivElement,
  canvas: document.getElementById("view") as HTMLCanvasElement,
  banner: document.getElementById("banner") as HTMLDivElement,
  retry: document.getElementById("retry") as HTMLButtonElement,
  latency: document.getElementById("latency") as HTMLSpanElement,
  family: document.getElementById("family") as HTMLSpanElement,
  mirrorWrap: document.getElementById("mirror-wrap") as HTMLLabelElement,
  mirror: document.getElementById("mirror") as HTMLInputElement,
  colorbar: document.getElementById("colorbar") as HTMLCanvasElement,
  barLo: document.getElementById("bar-lo") as HTMLSpanElement,
  barHi: document.getElementById("bar-hi") as HTMLSpanElement,
};

function showError(message: string): void {
  el.banner.querySelector("span")!.textContent = message;
  el.banner.hidden = false;
}

function clearError(): void {
  el.banner.hidden = true;
}

function setBusy(busy: boolean): void {
  el.sliders.querySelectorAll("input").forEach((s) => (s.disabled = busy));
}

function drawColorbar(kind: FieldKind): void {
  const ctx = el.colorbar.getContext("2d")!;
  const { width, height } = el.colorbar;
  const map = colormapFor(kind);
  const [lo, hi] = colorRange(kind);
  for (let i = 0; i < width; i++) {
    const t = lo + ((hi - lo) * i) / (width - 1);
    const [r, g, b] = map(t);
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.fillRect(i, 0, 1, height);
  }
  el.barLo.textContent = String(lo);
  el.barHi.textContent = String(hi);
}

function draw(field: FieldResult, kind: FieldKind): void {
  const ctx = el.canvas.getContext("2d")!;
  ctx.clearRect(0, 0, el.canvas.width, el.canvas.height);
  if (field.dims.length === 2) {
    const raster = rasterize2d(field.dims, field.values, kind);
    const image = new ImageData(raster.data, raster.width, raster.height);
    const off = document.createElement("canvas");
    off.width = raster.width;
    off.height = raster.height;
    off.getContext("2d")!.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    const scale = Math.min(el.canvas.width / raster.width, el.canvas.height / raster.height);
    ctx.drawImage(off, 0, 0, raster.width * scale, raster.height * scale);
  } else {
    const scene = voxelScene(field.dims, field.values, kind);
    const [x0, x1] = scene.xRange;
    const [y0, y1] = scene.yRange;
    const scale = Math.min(
      (el.canvas.width - 20) / (x1 - x0),
      (el.canvas.height - 20) / (y1 - y0),
    );
    const tx = (x: number) => 10 + (x - x0) * scale;
    const ty = (y: number) => 10 + (y - y0) * scale;
    for (const quad of scene.quads) {
      const [r, g, b] = quad.color;
      ctx.fillStyle = `rgba(${r},${g},${b},${quad.alpha})`;
      ctx.beginPath();
      ctx.moveTo(tx(quad.points[0][0]), ty(quad.points[0][1]));
      for (const [px, py] of quad.points.slice(1)) ctx.lineTo(tx(px), ty(py));
      ctx.closePath();
      ctx.fill();
    }
  }
  drawColorbar(kind);
}

function render(response: PredictResponse): void {
  const field = response.fields[store.kind];
  if (!field) return;
  draw(field, store.kind);
  el.latency.textContent = `${field.latency_ms.toFixed(1)} ms (server)`;
}

function requestPredict(immediate = false): void {
  if (!store.meta) return;
  const cached = store.cached();
  if (cached) {
    clearError();
    render(cached); // same params + view already answered; no request
    return;
  }
  const meta = store.meta;
  const params = store.params.slice();
  const mirror = store.mirror;
  const kind = store.kind;
  const start = () => fetchPredict(BASE, meta.family, params, [kind], mirror);
  const apply = (response: PredictResponse) => {
    clearError();
    store.remember(response);
    render(response);
  };
  const fail = (err: unknown) => {
    if (err instanceof ApiError) {
      showError(`request rejected (${err.status}): ${err.message}`);
    } else {
      showError(`service unreachable: ${String(err)}`);
    }
  };
  if (immediate) scheduler.dispatch(start, apply, fail);
  else scheduler.schedule(start, apply, fail);
}

function buildSliders(): void {
  const meta = store.meta!;
  el.family.textContent = `${meta.family} ${meta.dims.join("x")} (v ${meta.version.slice(0, 12)})`;
  el.sliders.innerHTML = "";
  meta.params.forEach((spec, i) => {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = spec.name;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(spec.low);
    input.max = String(spec.high);
    input.step = String((spec.high - spec.low) / 200);
    input.value = String(store.params[i]);
    const value = document.createElement("span");
    value.textContent = store.params[i].toFixed(2);
    input.addEventListener("input", () => {
      store.setParam(i, Number(input.value));
      input.value = String(store.params[i]); // reflect clamping
      value.textContent = store.params[i].toFixed(2);
      requestPredict();
    });
    row.append(label, input, value);
    el.sliders.append(row);
  });
}

function buildFieldButtons(): void {
  const meta = store.meta!;
  el.fields.innerHTML = "";
  for (const name of meta.fields) {
    const button = document.createElement("button");
    button.textContent = name;
    button.dataset.kind = name;
    button.addEventListener("click", () => {
      store.kind = name as FieldKind;
      el.fields.querySelectorAll("button").forEach((b) =>
        b.classList.toggle("active", b.dataset.kind === name),
      );
      requestPredict(true);
    });
    if (name === store.kind) button.classList.add("active");
    el.fields.append(button);
  }
}

async function boot(): Promise<void> {
  setBusy(true);
  try {
    store.setMeta(await fetchMeta(BASE));
  } catch (err) {
    showError(`cannot reach the prediction service: ${String(err)}`);
    return;
  }
  clearError();
  buildSliders();
  buildFieldButtons();
  el.mirrorWrap.hidden = !store.mirrorAllowed();
  setBusy(false);
  requestPredict(true);
}

el.retry.addEventListener("click", () => {
  clearError();
  if (store.meta) requestPredict(true);
  else void boot();
});

el.mirror.addEventListener("change", () => {
  store.mirror = el.mirror.checked;
  requestPredict(true);
});

void boot();
