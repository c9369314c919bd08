"""Command-line entry points for the dataset/train/evaluate/serve pipeline."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .dataset import generate_dataset, read_dataset, write_dataset
from .errors import FormatError, OptimizerError, SolverError
from .problems import FAMILIES
from .server import available_fields, compute_fields, run_server
from .surrogate import (
    FIELD_KINDS,
    SurrogateSet,
    ae_config,
    evaluate,
    fc_config,
    train_field_surrogate,
)
from .studies import run_architecture_study, run_dataset_size_study

log = logging.getLogger(__name__)

AE_SUFFIX = "_ae.topn"
FC_SUFFIX = "_fc.topn"


class CliError(Exception):
    pass


def _int_list(text):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text):
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _str_list(text):
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def bundle_paths(models_dir, fields=None):
    """Discover {field}_ae/_fc bundle pairs in a directory."""
    models_dir = Path(models_dir)
    if not models_dir.is_dir():
        raise CliError(f"model directory {models_dir} does not exist")
    found = {}
    for ae_path in sorted(models_dir.glob(f"*{AE_SUFFIX}")):
        field = ae_path.name[: -len(AE_SUFFIX)]
        fc_path = models_dir / f"{field}{FC_SUFFIX}"
        if fc_path.exists():
            found[field] = (ae_path, fc_path)
    if fields:
        missing = [f for f in fields if f not in found]
        if missing:
            raise CliError(
                f"no bundle pair for {missing} in {models_dir} "
                f"(found: {sorted(found) or 'none'})"
            )
        found = {f: found[f] for f in fields}
    if not found:
        raise CliError(f"no *{AE_SUFFIX}/*{FC_SUFFIX} pairs in {models_dir}")
    return found


def _load_set(models_dir, fields=None):
    return SurrogateSet.load(bundle_paths(models_dir, fields))


def _train_configs(args, seed):
    ae = ae_config(max_epochs=args.ae_epochs, batch_size=args.batch,
                   learning_rate=args.lr, patience=args.patience, seed=seed)
    fc = fc_config(max_epochs=args.fc_epochs, batch_size=args.batch,
                   learning_rate=args.lr, patience=args.patience, seed=seed)
    return ae, fc


def cmd_generate(args):
    if args.count <= 0:
        raise CliError(f"--count must be positive, got {args.count}")
    ds = generate_dataset(args.family, args.count, args.seed,
                          worker_count=args.workers)
    write_dataset(args.out, ds)
    print(f"wrote {len(ds)} {args.family} records to {args.out}")
    return 0


def cmd_train(args):
    ds = read_dataset(args.dataset)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ae_cfg, fc_cfg = _train_configs(args, args.seed)
    units = tuple(_int_list(args.units)) if args.units else None
    hidden = tuple(_int_list(args.hidden)) if args.hidden else None
    for field in args.field:
        ae, fc = train_field_surrogate(
            ds, field, ae_cfg=ae_cfg, fc_cfg=fc_cfg,
            ae_variant=args.ae_variant, fc_variant=args.fc_variant,
            units=units, hidden=hidden, latent=args.latent, seed=args.seed,
        )
        ae_path = out_dir / f"{field}{AE_SUFFIX}"
        fc_path = out_dir / f"{field}{FC_SUFFIX}"
        h1 = ae.save(ae_path)
        h2 = fc.save(fc_path)
        print(f"{field}: autoencoder val loss {min(ae.val_loss):.6g} "
              f"-> {ae_path} ({h1[:12]})")
        print(f"{field}: regressor   val loss {min(fc.val_loss):.6g} "
              f"-> {fc_path} ({h2[:12]})")
    return 0


def cmd_evaluate(args):
    surrogates = _load_set(args.models, args.fields)
    testset = read_dataset(args.testset)
    report = evaluate(surrogates, testset, args.fields)
    print(report.to_machine() if args.machine else report.to_text())
    return 0


def _write_field_file(path, name, dims, values, latency_ms):
    nx = dims[0]
    with open(path, "w") as fh:
        fh.write(f"field {name}\n")
        fh.write("dims " + " ".join(str(d) for d in dims) + "\n")
        fh.write(f"latency_ms {latency_ms:.3f}\n")
        fh.write("values\n")
        flat = np.asarray(values)
        for start in range(0, flat.size, nx):
            fh.write(" ".join(f"{v:.6g}" for v in flat[start : start + nx]) + "\n")


def cmd_predict(args):
    surrogates = _load_set(args.models)
    params = np.asarray(_float_list(args.params), dtype=np.float32)
    fields = args.fields or surrogates.fields()
    known = available_fields(surrogates)
    unknown = [f for f in fields if f not in known]
    if unknown:
        raise CliError(f"unknown fields {unknown}; available: {known}")
    surrogates.check_params(params)  # raises with the bounds explanation
    computed = compute_fields(surrogates, params, fields, mirror=args.mirror)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, entry in computed.items():
        path = out_dir / f"{name}.field"
        ms = entry["seconds"] * 1e3
        _write_field_file(path, name, entry["dims"], entry["values"], ms)
        print(f"{name}: {ms:.1f} ms -> {path}")
    return 0


def cmd_study(args):
    train_ds = read_dataset(args.dataset)
    test_ds = read_dataset(args.testset)
    ae_cfg, fc_cfg = _train_configs(args, args.seed)
    if args.kind == "arch":
        study = run_architecture_study(
            train_ds, test_ds, field=args.field,
            ae_cfg=ae_cfg, fc_cfg=fc_cfg, latent=args.latent, seed=args.seed,
        )
    else:
        if not args.sizes:
            raise CliError("datasize study needs --sizes, e.g. --sizes 100,200,300")
        study = run_dataset_size_study(
            train_ds, _int_list(args.sizes), test_ds, field=args.field,
            ae_cfg=ae_cfg, fc_cfg=fc_cfg, latent=args.latent, seed=args.seed,
        )
    print(study.to_machine() if args.machine else study.to_text())
    return 0


def cmd_serve(args):
    surrogates = _load_set(args.models, args.fields)
    run_server(surrogates, args.port)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topoform",
        description="dataset generation, surrogate training, and serving",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="solve instances into a dataset file")
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit autoencoder + regressor bundles")
    p.add_argument("--dataset", required=True)
    p.add_argument("--field", nargs="+", choices=list(FIELD_KINDS),
                   default=["density"])
    p.add_argument("--out", required=True, help="directory for *.topn bundles")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ae-epochs", type=int, default=250)
    p.add_argument("--fc-epochs", type=int, default=400)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--ae-variant", choices=["ref", "plus", "minus"], default="ref")
    p.add_argument("--fc-variant", choices=["ref", "plus", "minus"], default="ref")
    p.add_argument("--units", help="conv channels, e.g. 128,64,32,32")
    p.add_argument("--hidden", help="regressor widths, e.g. 720,720")
    p.add_argument("--latent", type=int, default=40)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score bundles against a test dataset")
    p.add_argument("--models", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--fields", type=_str_list, default=None)
    p.add_argument("--machine", action="store_true",
                   help="parse-friendly `field metric value` lines")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="write predicted field files")
    p.add_argument("--models", required=True)
    p.add_argument("--params", required=True, help="comma-separated values")
    p.add_argument("--fields", type=_str_list, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--mirror", action="store_true",
                   help="reflect 3D fields across the far z face")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("study", help="architecture or dataset-size sweeps")
    p.add_argument("--kind", required=True, choices=["arch", "datasize"])
    p.add_argument("--dataset", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--field", default="density", choices=list(FIELD_KINDS))
    p.add_argument("--sizes", help="datasize subsets, e.g. 100,200,300")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ae-epochs", type=int, default=250)
    p.add_argument("--fc-epochs", type=int, default=400)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=30)
    p.add_argument("--latent", type=int, default=40)
    p.add_argument("--machine", action="store_true")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("serve", help="HTTP prediction service")
    p.add_argument("--models", required=True)
    p.add_argument("--fields", type=_str_list, default=None)
    p.add_argument("--port", type=int, default=8080,
                   help="overridden by TOPOFORM_PORT when set")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CliError, FormatError, OptimizerError, SolverError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
