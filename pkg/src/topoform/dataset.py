"""Dataset generation, persistence, and splitting.

A dataset is I solved problem instances: parameter vector, converged density
field, and the two normalized stress fields with their per-sample scales.
Files use a little-endian binary container whose header pins the geometry
fingerprint, so stale data cannot silently poison training.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import simp, stress
from .errors import FormatError, OptimizerError, SolverError
from .problems import Problem, latin_hypercube, make_problem

log = logging.getLogger(__name__)

MAGIC = b"TOPO"
FORMAT_VERSION = 1
FIELD_BITS = {"density": 1, "vm": 2, "tc": 4}
NORMALIZATION = "per-sample-peak"


@dataclass
class Dataset:
    family: str
    dims: tuple
    params: np.ndarray  # (I, n_par) float32
    density: np.ndarray | None  # (I, N_e) float32 in [0, 1]
    vm: np.ndarray | None  # (I, N_e) float32 in [0, 1]
    tc: np.ndarray | None  # (I, N_e) float32 in [-1, 1]
    vm_scale: np.ndarray | None  # (I,) raw peak magnitudes
    tc_scale: np.ndarray | None
    geometry_hash: bytes
    seed: int
    element_size: float = 1.0
    normalization: str = NORMALIZATION

    def __len__(self):
        return self.params.shape[0]

    @property
    def n_par(self):
        return self.params.shape[1]

    @property
    def n_elements(self):
        return int(np.prod(self.dims))

    def field(self, kind):
        arr = getattr(self, kind if kind != "density" else "density")
        if arr is None:
            raise KeyError(f"dataset has no {kind!r} field")
        return arr

    def present_fields(self):
        return [k for k in ("density", "vm", "tc") if getattr(self, k) is not None]

    def take(self, indices):
        """New dataset holding the selected records (header unchanged)."""
        indices = np.asarray(indices)
        pick = lambda a: None if a is None else a[indices].copy()
        return replace(
            self,
            params=self.params[indices].copy(),
            density=pick(self.density),
            vm=pick(self.vm),
            tc=pick(self.tc),
            vm_scale=pick(self.vm_scale),
            tc_scale=pick(self.tc_scale),
        )

    def validate(self):
        n = len(self)
        if len(self.dims) not in (2, 3):
            raise ValueError(f"dims must have 2 or 3 axes, got {self.dims}")
        if len(self.geometry_hash) != 32:
            raise ValueError("geometry hash must be 32 bytes")
        ne = self.n_elements
        for kind in self.present_fields():
            arr = getattr(self, kind)
            if arr.shape != (n, ne):
                raise ValueError(f"{kind} field shaped {arr.shape}, expected {(n, ne)}")
        if self.density is not None and n:
            if self.density.min() < 0 or self.density.max() > 1:
                raise ValueError("density values must lie in [0, 1]")
        if self.vm is not None and n:
            if self.vm.min() < 0 or self.vm.max() > 1:
                raise ValueError("normalized vm values must lie in [0, 1]")
            if self.vm_scale is None or self.vm_scale.shape != (n,):
                raise ValueError("vm field requires per-record scales")
        if self.tc is not None and n:
            if np.abs(self.tc).max() > 1:
                raise ValueError("normalized tc values must lie in [-1, 1]")
            if self.tc_scale is None or self.tc_scale.shape != (n,):
                raise ValueError("tc field requires per-record scales")
        if n:
            unique = np.unique(self.params, axis=0)
            if unique.shape[0] != n:
                raise ValueError("duplicate parameter vectors in dataset")
        return self


def field_to_grid(values, dims):
    """Element vector -> spatial grid shaped like dims (x, y[, z]).

    The element order is x fastest; a reshape to reversed(dims) followed by a
    transpose yields an array indexed [ix, iy(, iz)].
    """
    values = np.asarray(values)
    vol = values.reshape(tuple(reversed(dims)))
    return vol.transpose(tuple(reversed(range(len(dims)))))


def grid_to_field(grid):
    """Inverse of field_to_grid."""
    grid = np.asarray(grid)
    nd = grid.ndim
    return grid.transpose(tuple(reversed(range(nd)))).ravel()


def solve_instance(problem, values):
    """Run the optimizer for one parameter vector and post-process stresses.

    Returns (density, vm, tc, vm_scale, tc_scale) as float arrays.
    """
    bcs = problem.boundary_conditions(values)
    result = simp.optimize(
        problem.mesh,
        bcs,
        problem.material,
        problem.simp,
        passive_solid=problem.passive_solid,
        passive_void=problem.passive_void,
    )
    vm_raw, tc_raw = stress.stress_fields(problem.mesh, result.u, problem.material)
    vm, vm_scale = stress.normalize_field(vm_raw)
    tc, tc_scale = stress.normalize_field(tc_raw, signed=True)
    return result.x, vm, tc, vm_scale, tc_scale


def _solve_indexed(args):
    problem, index, values = args
    try:
        return index, solve_instance(problem, values)
    except (SolverError, OptimizerError) as exc:
        log.info("sample %d failed (%s); will redraw", index, exc)
        return index, None


def _replacement_draw(problem, seed, k):
    # a size-1 stratified sample is a uniform draw over the full box
    return latin_hypercube(problem.param_specs, 1, [seed, 1_000_003, k])[0]


def generate_dataset(family, I, seed, worker_count=1, problem=None):
    """Solve I stratified parameter draws into a dataset.

    Deterministic for a given seed and independent of worker_count: samples
    are seeded per index, failed samples are replaced from a dedicated
    replacement stream consumed in index order.
    """
    if I < 1:
        raise ValueError(f"sample count must be >= 1, got {I}")
    if problem is None:
        problem = make_problem(family) if isinstance(family, str) else family
    params = latin_hypercube(problem.param_specs, I, seed).astype(np.float64)
    results = [None] * I
    pending = list(range(I))
    next_replacement = 0
    rounds = 0
    while pending:
        rounds += 1
        if rounds > 50:
            raise OptimizerError(
                f"dataset generation stalled: {len(pending)} samples still "
                f"failing after {rounds - 1} replacement rounds"
            )
        jobs = [(problem, i, params[i]) for i in pending]
        if worker_count > 1:
            import multiprocessing

            with multiprocessing.Pool(worker_count) as pool:
                outcomes = pool.map(_solve_indexed, jobs)
        else:
            outcomes = [_solve_indexed(j) for j in jobs]
        failed = []
        for index, payload in outcomes:
            if payload is None:
                failed.append(index)
            else:
                results[index] = payload
        for index in sorted(failed):
            while True:
                draw = _replacement_draw(problem, seed, next_replacement)
                next_replacement += 1
                if not any(np.array_equal(draw, params[j]) for j in range(I)):
                    break
            params[index] = draw
        pending = sorted(failed)
    ne = problem.mesh.n_elements
    density = np.empty((I, ne), dtype=np.float32)
    vm = np.empty((I, ne), dtype=np.float32)
    tc = np.empty((I, ne), dtype=np.float32)
    vm_scale = np.empty(I, dtype=np.float32)
    tc_scale = np.empty(I, dtype=np.float32)
    for i, (x, v, t, vs, ts) in enumerate(results):
        density[i] = x
        vm[i] = v
        tc[i] = t
        vm_scale[i] = vs
        tc_scale[i] = ts
    # float32 rounding can poke a hair past the closed bounds
    np.clip(density, 0.0, 1.0, out=density)
    np.clip(vm, 0.0, 1.0, out=vm)
    np.clip(tc, -1.0, 1.0, out=tc)
    ds = Dataset(
        family=problem.family,
        dims=problem.mesh.dims,
        params=params.astype(np.float32),
        density=density,
        vm=vm,
        tc=tc,
        vm_scale=vm_scale,
        tc_scale=tc_scale,
        geometry_hash=problem.geometry_hash(),
        seed=seed,
        element_size=problem.mesh.element_size,
    )
    return ds.validate()


def split_train_val(dataset, ratio, seed):
    """Disjoint, exhaustive, seed-deterministic shuffle split."""
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratio * n))
    return dataset.take(perm[:n_train]), dataset.take(perm[n_train:])


# ---------------------------------------------------------------------------
# binary container
# ---------------------------------------------------------------------------


def _metadata_block(ds):
    text = (
        f"family={ds.family}\n"
        f"seed={ds.seed}\n"
        f"normalization={ds.normalization}\n"
        f"element_size={ds.element_size!r}\n"
        f"ndim={len(ds.dims)}\n"
    )
    return text.encode("utf-8")


def _parse_metadata(blob):
    meta = {}
    for line in blob.decode("utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            meta[key] = value
    return meta


def write_dataset(path, dataset):
    dataset.validate()
    dims3 = tuple(dataset.dims) + (1,) * (3 - len(dataset.dims))
    bitmask = sum(FIELD_BITS[k] for k in dataset.present_fields())
    meta = _metadata_block(dataset)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<3I", *dims3))
        fh.write(struct.pack("<I", dataset.n_par))
        fh.write(struct.pack("<Q", len(dataset)))
        fh.write(struct.pack("<I", bitmask))
        fh.write(dataset.geometry_hash)
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        for i in range(len(dataset)):
            fh.write(dataset.params[i].astype("<f4").tobytes())
            for kind in ("density", "vm", "tc"):
                arr = getattr(dataset, kind)
                if arr is not None:
                    fh.write(arr[i].astype("<f4").tobytes())
            if dataset.vm is not None:
                fh.write(struct.pack("<f", float(dataset.vm_scale[i])))
            if dataset.tc is not None:
                fh.write(struct.pack("<f", float(dataset.tc_scale[i])))


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}", offset=fh.tell())
    return data


def read_dataset(path, expect_geometry=None):
    """Load a dataset file; verifies magic, version, and (optionally) geometry.

    expect_geometry may be a Problem or a 32-byte hash; a mismatch raises
    FormatError rather than returning data from the wrong geometry.
    """
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise FormatError(
                f"unsupported format version {version} (reader supports "
                f"{FORMAT_VERSION})",
                offset=4,
            )
        dims3 = struct.unpack("<3I", _read_exact(fh, 12, "grid dims"))
        (n_par,) = struct.unpack("<I", _read_exact(fh, 4, "parameter count"))
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "record count"))
        (bitmask,) = struct.unpack("<I", _read_exact(fh, 4, "field bitmask"))
        geometry_hash = _read_exact(fh, 32, "geometry hash")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta = _parse_metadata(_read_exact(fh, meta_len, "metadata block"))
        ndim = int(meta.get("ndim", 3 if dims3[2] > 1 else 2))
        dims = tuple(int(d) for d in dims3[:ndim])
        ne = int(np.prod(dims))
        present = [k for k, bit in FIELD_BITS.items() if bitmask & bit]
        rec_floats = n_par + ne * len(present)
        rec_floats += ("vm" in present) + ("tc" in present)
        payload = fh.read()
        expected = count * rec_floats * 4
        if len(payload) != expected:
            raise FormatError(
                f"record payload is {len(payload)} bytes, expected {expected}",
                offset=72 + meta_len + min(len(payload), expected),
            )
    flat = np.frombuffer(payload, dtype="<f4").reshape(count, rec_floats)
    cursor = 0

    def chunk(width):
        nonlocal cursor
        block = flat[:, cursor : cursor + width]
        cursor += width
        return np.ascontiguousarray(block)

    params = chunk(n_par)
    fields = {}
    for kind in ("density", "vm", "tc"):
        fields[kind] = chunk(ne) if kind in present else None
    vm_scale = chunk(1).ravel() if "vm" in present else None
    tc_scale = chunk(1).ravel() if "tc" in present else None
    ds = Dataset(
        family=meta.get("family", "unknown"),
        dims=dims,
        params=params,
        density=fields["density"],
        vm=fields["vm"],
        tc=fields["tc"],
        vm_scale=vm_scale,
        tc_scale=tc_scale,
        geometry_hash=geometry_hash,
        seed=int(meta.get("seed", -1)),
        element_size=float(meta.get("element_size", 1.0)),
        normalization=meta.get("normalization", NORMALIZATION),
    )
    ds.validate()
    if expect_geometry is not None:
        want = (
            expect_geometry.geometry_hash()
            if isinstance(expect_geometry, Problem)
            else bytes(expect_geometry)
        )
        if ds.geometry_hash != want:
            raise FormatError(
                "dataset geometry hash does not match the requested problem; "
                "regenerate the dataset or pass the matching family/grid"
            )
    return ds


@dataclass
class LatentDataset:
    """Latent encodings h(field) per record, paired with their parameters."""

    params: np.ndarray  # (I, n_par)
    latents: dict  # field kind -> (I, N_L)
    geometry_hash: bytes

    def __len__(self):
        return self.params.shape[0]

    @property
    def latent_size(self):
        return next(iter(self.latents.values())).shape[1]
