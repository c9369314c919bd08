// Typed client for the prediction service. Responses are validated before
// use so a malformed payload surfaces as one clear error, not NaN renders.

export interface ParamSpec {
  name: string;
  low: number;
  high: number;
}

export interface Meta {
  family: string;
  params: ParamSpec[];
  dims: number[];
  element_size: number;
  fields: string[];
  version: string;
}

export interface FieldResult {
  dims: number[];
  values: number[];
  latency_ms: number;
}

export interface PredictResponse {
  family: string;
  version: string;
  fields: Record<string, FieldResult>;
}

export class ApiError extends Error {
  status: number;
  field: string;

  constructor(status: number, field: string, message: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

export function parseMeta(raw: unknown): Meta {
  const m = raw as Partial<Meta>;
  if (
    !m ||
    typeof m.family !== "string" ||
    !Array.isArray(m.params) ||
    !Array.isArray(m.dims) ||
    !Array.isArray(m.fields) ||
    typeof m.version !== "string" ||
    !isFiniteNumber(m.element_size)
  ) {
    throw new Error("meta response is missing required keys");
  }
  for (const p of m.params) {
    if (typeof p.name !== "string" || !isFiniteNumber(p.low) || !isFiniteNumber(p.high) || p.low > p.high) {
      throw new Error(`bad parameter spec in meta: ${JSON.stringify(p)}`);
    }
  }
  if (!m.dims.every(isFiniteNumber) || m.dims.length < 2 || m.dims.length > 3) {
    throw new Error(`bad grid dims in meta: ${JSON.stringify(m.dims)}`);
  }
  return m as Meta;
}

export function parsePredict(raw: unknown): PredictResponse {
  const r = raw as Partial<PredictResponse>;
  if (!r || typeof r.family !== "string" || typeof r.version !== "string" || typeof r.fields !== "object" || r.fields === null) {
    throw new Error("predict response is missing required keys");
  }
  for (const [name, f] of Object.entries(r.fields)) {
    if (!Array.isArray(f.dims) || !Array.isArray(f.values) || !isFiniteNumber(f.latency_ms)) {
      throw new Error(`field ${name}: malformed entry`);
    }
    const n = f.dims.reduce((a, b) => a * b, 1);
    if (f.values.length !== n) {
      throw new Error(`field ${name}: ${f.values.length} values for dims ${f.dims.join("x")}`);
    }
  }
  return r as PredictResponse;
}

async function errorFrom(resp: Response): Promise<ApiError> {
  let field = "";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = (await resp.json()) as { error?: { field?: string; message?: string } };
    if (body.error) {
      field = body.error.field ?? "";
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(resp.status, field, message);
}

export async function fetchMeta(base: string): Promise<Meta> {
  const resp = await fetch(`${base}/meta`);
  if (!resp.ok) throw await errorFrom(resp);
  return parseMeta(await resp.json());
}

export async function fetchPredict(
  base: string,
  family: string,
  params: number[],
  fields: string[],
  mirror: boolean,
): Promise<PredictResponse> {
  const body: Record<string, unknown> = { family, params, fields };
  if (mirror) body.mirror = true;
  const resp = await fetch(`${base}/predict`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!resp.ok) throw await errorFrom(resp);
  return parsePredict(await resp.json());
}
