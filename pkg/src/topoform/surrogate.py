"""Two-stage surrogate: field autoencoders plus a parameter->latent regressor.

Per field kind the pipeline is

    train autoencoder on the field grids          (BCE for density, MSE else)
    encode the training set into latent vectors
    train the regressor params -> latents         (MSE)
    predict(p) = decoder(regressor(p))

Each field kind gets its own independent autoencoder/regressor pair; the
pairs are grouped in a SurrogateSet that checks they describe the same
problem geometry.
"""

from __future__ import annotations

import hashlib
import time
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .dataset import Dataset, LatentDataset, field_to_grid
from .nn import (
    LATENT_SIZE,
    TrainConfig,
    autoencoder_for_field,
    bundle_hash,
    load_bundle,
    regressor_variant,
    save_bundle,
    train_model,
    xavier_init,
)
from .problems import make_problem
from .stress import combined_field

FIELD_KINDS = ("density", "vm", "tc")
FIELD_LOSSES = {"density": "bce", "vm": "mse", "tc": "mse"}
# binarization rules behind the accuracy metric
BA_THRESHOLDS = {"density": 0.5, "vm": 0.5, "tc": "sign"}

AE_DEFAULTS = dict(max_epochs=250, batch_size=32, learning_rate=1e-4, patience=30)
FC_DEFAULTS = dict(max_epochs=400, batch_size=32, learning_rate=1e-4, patience=30)


def ae_config(**overrides):
    return TrainConfig(**{**AE_DEFAULTS, **overrides})


def fc_config(**overrides):
    return TrainConfig(**{**FC_DEFAULTS, **overrides})


def problem_for(family, dims, element_size):
    names = ("nx", "ny", "nz")[: len(dims)]
    return make_problem(family, **dict(zip(names, dims)), element_size=element_size)


# -- training stages -----------------------------------------------------


@dataclass
class TrainedModel:
    model: object
    metadata: dict
    train_loss: list
    val_loss: list

    def save(self, path):
        meta = dict(self.metadata)
        meta["train_loss"] = [float(v) for v in self.train_loss]
        meta["val_loss"] = [float(v) for v in self.val_loss]
        return save_bundle(path, self.model, meta)


def _dataset_grids(dataset, field):
    try:
        flat = dataset.field(field)
    except KeyError as exc:
        raise ValueError(str(exc)) from exc
    grids = np.stack([field_to_grid(row, dataset.dims) for row in flat])
    return grids[..., None].astype(np.float32)


def _grids_to_flat(grids):
    """(I, *dims) grids -> (I, N_e) element vectors (x fastest)."""
    order = (0,) + tuple(range(grids.ndim - 1, 0, -1))
    return np.ascontiguousarray(grids.transpose(order)).reshape(len(grids), -1)


def _base_metadata(dataset, field):
    return {
        "field": field,
        "family": dataset.family,
        "dims": list(dataset.dims),
        "element_size": float(dataset.element_size),
        "geometry_hash": dataset.geometry_hash.hex(),
        "normalization": dataset.normalization,
    }


def train_autoencoder(dataset, field, config=None, variant="ref", units=None,
                      latent=LATENT_SIZE, seed=0):
    """Fit a field autoencoder; the loss follows the field kind."""
    grids = _dataset_grids(dataset, field)
    model = autoencoder_for_field(dataset.dims, field, variant=variant,
                                  units=units, latent=latent)
    xavier_init(model, seed)
    cfg = config if config is not None else ae_config(seed=seed)
    result = train_model(model, grids, grids, FIELD_LOSSES[field], cfg)
    meta = _base_metadata(dataset, field)
    meta.update(kind="autoencoder", variant=variant, latent=int(latent),
                seed=int(seed), loss=FIELD_LOSSES[field],
                epochs_run=result.epochs_run, best_epoch=result.best_epoch)
    return TrainedModel(model, meta, result.train_loss, result.val_loss)


def encode_dataset(trained_ae, dataset) -> LatentDataset:
    """Latent vector per record through the autoencoder's encoder half."""
    model, meta = _unpack(trained_ae)
    field = meta["field"]
    grids = _dataset_grids(dataset, field)
    stop = model.bottleneck
    out = []
    for start in range(0, len(grids), 32):
        out.append(model.forward(grids[start : start + 32], training=False, stop=stop))
    latents = np.concatenate(out, axis=0)
    return LatentDataset(
        params=dataset.params.copy(),
        latents={field: latents},
        geometry_hash=dataset.geometry_hash,
    )


def train_regressor(latent_dataset, field, config=None, variant="ref",
                    hidden=None, seed=0, base_metadata=None):
    """Fit the parameter -> latent regressor for one field kind."""
    if field not in latent_dataset.latents:
        raise ValueError(f"latent dataset has no {field!r} entry")
    targets = latent_dataset.latents[field]
    model = regressor_variant(latent_dataset.params.shape[1], variant=variant,
                              hidden=hidden, latent=targets.shape[1])
    xavier_init(model, seed)
    cfg = config if config is not None else fc_config(seed=seed)
    result = train_model(model, latent_dataset.params, targets, "mse", cfg)
    meta = dict(base_metadata or {})
    meta.update(kind="regressor", field=field, variant=variant, seed=int(seed),
                latent=int(targets.shape[1]),
                geometry_hash=latent_dataset.geometry_hash.hex(),
                epochs_run=result.epochs_run, best_epoch=result.best_epoch)
    return TrainedModel(model, meta, result.train_loss, result.val_loss)


def _unpack(trained):
    if isinstance(trained, TrainedModel):
        return trained.model, trained.metadata
    model, meta = trained
    return model, meta


# -- the assembled surrogate ----------------------------------------------


@dataclass
class FieldSurrogate:
    field: str
    ae: object
    fc: object
    ae_meta: dict
    fc_meta: dict

    def __post_init__(self):
        latent = self.ae.shapes[self.ae.bottleneck]
        if self.fc.output_shape != latent:
            raise ValueError(
                f"{self.field}: regressor emits {self.fc.output_shape}, "
                f"autoencoder bottleneck is {latent}"
            )
        if self.ae_meta.get("geometry_hash") != self.fc_meta.get("geometry_hash"):
            raise ValueError(f"{self.field}: bundle geometry hashes disagree")


@dataclass
class Prediction:
    field: str
    values: np.ndarray  # flat, element order
    dims: tuple
    seconds: float

    @property
    def grid(self):
        return field_to_grid(self.values, self.dims)


class SurrogateSet:
    """Per-field surrogate pairs sharing one problem geometry."""

    def __init__(self, pairs):
        if not pairs:
            raise ValueError("no field surrogates supplied")
        hashes = {p.ae_meta["geometry_hash"] for p in pairs.values()}
        if len(hashes) != 1:
            raise ValueError(f"surrogates span {len(hashes)} different geometries")
        self.pairs = dict(pairs)
        meta = next(iter(pairs.values())).ae_meta
        self.family = meta["family"]
        self.dims = tuple(meta["dims"])
        self.element_size = meta["element_size"]
        self.geometry_hash = meta["geometry_hash"]
        self.problem = problem_for(self.family, self.dims, self.element_size)
        if self.problem.geometry_hash().hex() != self.geometry_hash:
            raise ValueError(
                "bundle geometry hash does not match the reconstructed problem"
            )
        self.version = "unsaved"

    @classmethod
    def from_trained(cls, trained_pairs):
        """trained_pairs: field -> (TrainedModel ae, TrainedModel fc)."""
        pairs = {}
        for field, (ae, fc) in trained_pairs.items():
            pairs[field] = FieldSurrogate(field, ae.model, fc.model,
                                          ae.metadata, fc.metadata)
        return cls(pairs)

    @classmethod
    def load(cls, bundle_paths):
        """bundle_paths: field -> (ae_path, fc_path)."""
        pairs = {}
        digest = hashlib.sha256()
        for field in sorted(bundle_paths):
            ae_path, fc_path = bundle_paths[field]
            ae, ae_meta = load_bundle(ae_path)
            fc, fc_meta = load_bundle(fc_path)
            if ae_meta.get("kind") != "autoencoder":
                raise ValueError(f"{ae_path} is not an autoencoder bundle")
            if fc_meta.get("kind") != "regressor":
                raise ValueError(f"{fc_path} is not a regressor bundle")
            for meta, path in ((ae_meta, ae_path), (fc_meta, fc_path)):
                if meta.get("field") != field:
                    raise ValueError(
                        f"{path} holds a {meta.get('field')!r} model, wanted {field!r}"
                    )
            pairs[field] = FieldSurrogate(field, ae, fc, ae_meta, fc_meta)
            digest.update(f"{field} {bundle_hash(ae_path)} {bundle_hash(fc_path)}\n"
                          .encode())
        out = cls(pairs)
        out.version = digest.hexdigest()
        return out

    def fields(self):
        return sorted(self.pairs)

    def param_specs(self):
        return self.problem.param_specs

    def check_params(self, p, strict=True):
        p = np.asarray(p, dtype=np.float32).reshape(-1)
        try:
            self.problem.validate_params(p)
        except ValueError:
            if strict:
                raise
            warnings.warn("parameters outside the training box; extrapolating",
                          stacklevel=3)
        return p

    def decode_latents(self, field, z):
        pair = self.pairs[field]
        out = pair.ae.forward(z, training=False, start=pair.ae.bottleneck)
        return out[..., 0]

    def predict(self, p, fields=None, strict=True):
        """One parameter vector -> {field: Prediction} with wall clock."""
        fields = self.fields() if fields is None else list(fields)
        p = self.check_params(p, strict=strict)
        out = {}
        for field in fields:
            if field not in self.pairs:
                raise ValueError(f"no surrogate for field {field!r}")
            t0 = time.perf_counter()
            pair = self.pairs[field]
            z = pair.fc.forward(p[None], training=False)
            flat = _grids_to_flat(self.decode_latents(field, z))[0]
            if field == "tc":
                flat = np.clip(flat, -1.0, 1.0)
            seconds = time.perf_counter() - t0
            out[field] = Prediction(field, flat.astype(np.float32),
                                    self.dims, seconds)
        return out

    def predict_batch(self, params, field):
        """Batched fields for evaluation: (I, n_par) -> (I, N_e)."""
        pair = self.pairs[field]
        rows = []
        for start in range(0, len(params), 32):
            z = pair.fc.forward(params[start : start + 32], training=False)
            rows.append(_grids_to_flat(self.decode_latents(field, z)))
        out = np.concatenate(rows, axis=0)
        if field == "tc":
            out = np.clip(out, -1.0, 1.0)
        return out


def combined_prediction(x, s):
    """Element-wise product of a predicted topology and stress field."""
    return combined_field(np.asarray(x), np.asarray(s))


# -- metrics ---------------------------------------------------------------


def binarize(values, field):
    if field == "tc":
        return np.asarray(values) >= 0.0
    return np.asarray(values) > 0.5


def sample_metrics(pred, truth, field):
    """Per-sample (ba%, mae, rmse) arrays for (I, N_e) inputs."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    ba = 100.0 * (binarize(pred, field) == binarize(truth, field)).mean(axis=-1)
    err = pred - truth
    mae = np.abs(err).mean(axis=-1)
    rmse = np.sqrt((err * err).mean(axis=-1))
    return ba, mae, rmse


@dataclass
class MetricsReport:
    entries: dict  # field -> {"ba": %, "mae": float, "rmse": float}
    n_samples: int
    thresholds: dict = dc_field(default_factory=lambda: dict(BA_THRESHOLDS))

    def __post_init__(self):
        for field, m in self.entries.items():
            if not 0.0 <= m["ba"] <= 100.0:
                raise ValueError(f"{field}: accuracy {m['ba']} outside [0, 100]")
            if m["mae"] < 0 or m["rmse"] < 0 or m["rmse"] < m["mae"] - 1e-12:
                raise ValueError(f"{field}: inconsistent error metrics {m}")

    def to_text(self):
        lines = [f"samples: {self.n_samples}",
                 f"{'field':<10}{'BA %':>8}{'MAE':>10}{'RMSE':>10}"]
        for field in sorted(self.entries):
            m = self.entries[field]
            lines.append(
                f"{field:<10}{m['ba']:>8.2f}{m['mae']:>10.4f}{m['rmse']:>10.4f}"
            )
        return "\n".join(lines)

    def to_machine(self):
        lines = []
        for field in sorted(self.entries):
            for metric in ("ba", "mae", "rmse"):
                lines.append(f"{field} {metric} {self.entries[field][metric]:.6g}")
        return "\n".join(lines)


def evaluate(surrogates, test_dataset, fields=None):
    """Metrics of the surrogate predictions against reference solves."""
    if len(test_dataset) == 0:
        raise ValueError("test set is empty")
    if test_dataset.geometry_hash.hex() != surrogates.geometry_hash:
        raise ValueError("test set geometry does not match the surrogate")
    fields = surrogates.fields() if fields is None else list(fields)
    entries = {}
    for field in fields:
        truth = test_dataset.field(field)
        pred = surrogates.predict_batch(test_dataset.params, field)
        ba, mae, rmse = sample_metrics(pred, truth, field)
        entries[field] = {"ba": float(ba.mean()), "mae": float(mae.mean()),
                          "rmse": float(rmse.mean())}
    return MetricsReport(entries, n_samples=len(test_dataset))


# -- end-to-end helpers ----------------------------------------------------


def train_field_surrogate(dataset, field, ae_cfg=None, fc_cfg=None,
                          ae_variant="ref", fc_variant="ref", units=None,
                          hidden=None, latent=LATENT_SIZE, seed=0):
    """Full pipeline for one field kind; returns (ae, fc) TrainedModels."""
    ae = train_autoencoder(dataset, field, config=ae_cfg, variant=ae_variant,
                           units=units, latent=latent, seed=seed)
    latents = encode_dataset(ae, dataset)
    fc = train_regressor(latents, field, config=fc_cfg, variant=fc_variant,
                         hidden=hidden, seed=seed + 1,
                         base_metadata=_base_metadata(dataset, field))
    return ae, fc


def reconstruction_accuracy(trained_ae, dataset):
    """Mean per-sample BA of the autoencoder reconstructing its inputs."""
    model, meta = _unpack(trained_ae)
    field = meta["field"]
    truth = dataset.field(field)
    grids = _dataset_grids(dataset, field)
    rows = []
    for start in range(0, len(grids), 32):
        out = model.forward(grids[start : start + 32], training=False)[..., 0]
        rows.append(_grids_to_flat(out))
    recon = np.concatenate(rows, axis=0)
    ba, _, _ = sample_metrics(recon, truth, field)
    return float(ba.mean())
