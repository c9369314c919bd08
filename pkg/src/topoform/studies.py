"""Experiment runners: architecture variants and dataset-size trends."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from .surrogate import (
    SurrogateSet,
    encode_dataset,
    evaluate,
    train_autoencoder,
    train_regressor,
    train_field_surrogate,
    _base_metadata,
)

log = logging.getLogger(__name__)

VARIANT_LABELS = {"ref": "", "plus": "+", "minus": "-"}

METRICS = ("ba", "mae", "rmse")


def _label(kind, variant):
    return kind + VARIANT_LABELS[variant]


@dataclass
class ArchitectureStudy:
    field: str
    cells: dict  # (ae_variant, fc_variant) -> {"ba":…, "mae":…, "rmse":…}
    reference: tuple = ("ref", "ref")

    def deltas(self, key):
        """Relative change vs the reference cell, in percent, per metric."""
        ref = self.cells[self.reference]
        cell = self.cells[key]
        out = {}
        for m in METRICS:
            denom = ref[m]
            out[m] = 0.0 if denom == 0 else 100.0 * (cell[m] - denom) / denom
        return out

    def to_text(self):
        lines = [f"architecture study on field {self.field!r}",
                 f"{'AE':<6}{'FC':<6}{'BA %':>8}{'MAE':>10}{'RMSE':>10}"
                 f"{'dBA %':>9}{'dMAE %':>9}{'dRMSE %':>9}"]
        for key in sorted(self.cells):
            m = self.cells[key]
            d = self.deltas(key)
            lines.append(
                f"{_label('AE', key[0]):<6}{_label('FC', key[1]):<6}"
                f"{m['ba']:>8.2f}{m['mae']:>10.4f}{m['rmse']:>10.4f}"
                f"{d['ba']:>+9.1f}{d['mae']:>+9.1f}{d['rmse']:>+9.1f}"
            )
        return "\n".join(lines)

    def to_machine(self):
        lines = []
        for key in sorted(self.cells):
            tag = f"{_label('AE', key[0])}{_label('FC', key[1])}"
            for m in METRICS:
                lines.append(f"{tag} {self.field} {m} {self.cells[key][m]:.6g}")
        return "\n".join(lines)


def run_architecture_study(train_dataset, test_dataset, field="density",
                           ae_variants=("ref", "plus", "minus"),
                           fc_variants=("ref", "plus", "minus"),
                           ae_cfg=None, fc_cfg=None,
                           units_by_variant=None, hidden_by_variant=None,
                           latent=None, seed=0):
    """Train every AE-variant x FC-variant pair and score it.

    Each regressor is trained on the latent space of the autoencoder it is
    paired with (pairing rule), so the grid has len(ae)xlen(fc) full
    trainings. units/hidden_by_variant allow width-reduced runs that keep
    the variant structure.
    """
    from .nn import LATENT_SIZE

    latent = LATENT_SIZE if latent is None else latent
    cells = {}
    for av in ae_variants:
        units = (units_by_variant or {}).get(av)
        ae = train_autoencoder(train_dataset, field, config=ae_cfg, variant=av,
                               units=units, latent=latent, seed=seed)
        latents = encode_dataset(ae, train_dataset)
        for fv in fc_variants:
            hidden = (hidden_by_variant or {}).get(fv)
            fc = train_regressor(latents, field, config=fc_cfg, variant=fv,
                                 hidden=hidden, seed=seed + 1,
                                 base_metadata=_base_metadata(train_dataset, field))
            pairset = SurrogateSet.from_trained({field: (ae, fc)})
            report = evaluate(pairset, test_dataset, [field])
            cells[(av, fv)] = dict(report.entries[field])
            log.info("arch study %s%s: %s", _label("AE", av), _label("FC", fv),
                     cells[(av, fv)])
    return ArchitectureStudy(field=field, cells=cells)


def cross_pair_metrics(trained_ae, trained_fc, test_dataset, experimental=False):
    """Score a regressor against a decoder it was NOT trained with.

    Only meaningful when both share the latent width; the latent spaces are
    generally incompatible, hence the explicit experimental opt-in.
    """
    if not experimental:
        raise ValueError(
            "cross-pairing a regressor with a foreign decoder is experimental; "
            "pass experimental=True to acknowledge"
        )
    field = trained_ae.metadata["field"]
    pairset = SurrogateSet.from_trained({field: (trained_ae, trained_fc)})
    return evaluate(pairset, test_dataset, [field])


@dataclass
class SizeStudy:
    field: str
    rows: list = dc_field(default_factory=list)  # {"size": n, metrics…}

    def to_text(self):
        lines = [f"dataset-size study on field {self.field!r}",
                 f"{'I':>6}{'BA %':>8}{'MAE':>10}{'RMSE':>10}"]
        for row in self.rows:
            lines.append(f"{row['size']:>6}{row['ba']:>8.2f}"
                         f"{row['mae']:>10.4f}{row['rmse']:>10.4f}")
        return "\n".join(lines)

    def to_machine(self):
        return "\n".join(
            f"I={row['size']} {self.field} {m} {row[m]:.6g}"
            for row in self.rows for m in METRICS
        )


def run_dataset_size_study(dataset, sizes, test_dataset, field="density",
                           ae_cfg=None, fc_cfg=None, units=None, hidden=None,
                           latent=None, seed=0):
    """Retrain on nested subsets (the first n records) of one dataset.

    Subsets are nested by construction: the size-n subset is records [0, n).
    Every run is scored against the same fixed test set.
    """
    from .nn import LATENT_SIZE

    latent = LATENT_SIZE if latent is None else latent
    sizes = sorted(int(s) for s in sizes)
    if not sizes:
        raise ValueError("no subset sizes given")
    if sizes[0] < 1 or sizes[-1] > len(dataset):
        raise ValueError(
            f"sizes must lie in [1, {len(dataset)}], got {sizes[0]}..{sizes[-1]}"
        )
    study = SizeStudy(field=field)
    for n in sizes:
        subset = dataset.take(np.arange(n))
        ae, fc = train_field_surrogate(subset, field, ae_cfg=ae_cfg,
                                       fc_cfg=fc_cfg, units=units,
                                       hidden=hidden, latent=latent, seed=seed)
        pairset = SurrogateSet.from_trained({field: (ae, fc)})
        report = evaluate(pairset, test_dataset, [field])
        row = {"size": n, **report.entries[field]}
        study.rows.append(row)
        log.info("size study I=%d: %s", n, row)
    return study
