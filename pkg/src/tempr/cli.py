"""Command-line entry points: synth, train, eval, ablate, report.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import trainer as tr
from .aggregate import VARIANTS
from .dataio import generate_synthetic, read_dataset, write_dataset
from .errors import ConfigError, FormatError
from .model import TemPrModel
from .numkit import NumericError
from .scales import STRATEGIES


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scales", type=int, default=4, help="number of progressive scales n")
    p.add_argument("--strategy", choices=STRATEGIES, default="increasing")
    p.add_argument("--frames", type=int, default=8, help="frames F sampled per scale")
    p.add_argument("--enc-channels", type=int, default=64, help="encoder/tower feature width C")
    p.add_argument("--enc-kind", choices=["toy3d"], default="toy3d")
    p.add_argument("--grid", default="8,4,4", help="pooled (t,h,w), comma separated")
    p.add_argument("--latent-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads-cross", type=int, default=4)
    p.add_argument("--heads-self", type=int, default=8)
    p.add_argument("--pe-bands", type=int, default=4)
    p.add_argument("--share-latent", choices=["on", "off"], default="on")
    p.add_argument("--share-classifier", choices=["on", "off"], default="on")
    p.add_argument("--share-towers", choices=["on", "off"], default="off")
    p.add_argument("--tower", choices=["attention", "mlp4", "mlp8"], default="attention")
    p.add_argument("--agg", choices=list(VARIANTS), default="adaptive")
    p.add_argument("--gate-theta", type=float, default=0.1)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", default="0.3,0.5,0.7,0.9", help="comma-separated observation ratios")
    p.add_argument("--train-rho", default="uniform", help="'uniform' or 'fixed:<v>'")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--beta-lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)


def _run_config(args) -> tr.RunConfig:
    grid = tuple(int(x) for x in args.grid.split(","))
    if len(grid) != 3:
        raise ConfigError("--grid needs three comma-separated sizes")
    return tr.RunConfig(
        dataset=getattr(args, "data", ""),
        rho_list=[float(r) for r in args.rho.split(",")],
        train_rho=args.train_rho,
        n_scales=args.scales, strategy=args.strategy, frames=args.frames,
        channels=args.enc_channels, grid=grid, latent_dim=args.latent_dim,
        layers=args.layers, heads_cross=args.heads_cross, heads_self=args.heads_self,
        pe_bands=args.pe_bands,
        share_towers=args.share_towers == "on",
        share_classifier=args.share_classifier == "on",
        share_latent=args.share_latent == "on",
        tower=args.tower, agg=args.agg, gate_theta=args.gate_theta,
        epochs=args.epochs, base_lr=args.lr, beta_lr=args.beta_lr,
        weight_decay=args.weight_decay, batch_size=args.batch_size,
        seed=args.seed, out_dir=str(getattr(args, "out", "runs")),
    ).validate()


def cmd_synth(args) -> int:
    ds = generate_synthetic(args.classes, args.clips_per_class, args.T, args.H, args.W,
                            seed=args.seed, channels=args.channels)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds.clips)} clips ({args.classes} classes) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    dataset = read_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model, record = tr.train(cfg, dataset, log=print)
    val = dataset.split("val") or dataset.clips
    record.eval = tr.evaluate(model, val, cfg.rho_list, cfg)
    model.save(out / "model.npz")
    (out / "metrics.json").write_text(json.dumps(
        {**record.canonical(), "wall_clock": record.wall_clock}, indent=2, sort_keys=True))
    rows = tr.rows_from_eval("train", record.eval, cfg.seed)
    tr.report([record], rows, cfg.n_scales, out / "results")
    for rho_key, e in sorted(record.eval.items(), key=lambda kv: float(kv[0])):
        towers = " ".join(f"{t:.3f}" for t in e["towers"])
        print(f"rho {rho_key}: agg {e['agg_top1']:.3f}  towers {towers}")
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    dataset = read_dataset(args.data)
    model = TemPrModel.load(args.checkpoint)
    clips = dataset.split(args.split) or dataset.clips
    table = tr.evaluate(model, clips, cfg.rho_list, cfg, eval_seed=args.seed)
    print(json.dumps(table, indent=2, sort_keys=True))
    if args.out:
        rows = tr.rows_from_eval("eval", table, cfg.seed)
        tr.report([], rows, model.config.n_scales, Path(args.out))
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    dataset = read_dataset(args.data)
    values = args.values.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    rows, records, accounting = tr.ablate(args.axis, values, cfg, dataset, seeds=seeds, log=print)
    out = Path(args.out)
    csv_path, json_path = tr.report(records, rows, cfg.n_scales, out)
    acc_path = Path(str(out) + ".accounting.json")
    acc_path.write_text(json.dumps(accounting, indent=2, sort_keys=True))
    print(f"wrote {csv_path}, {json_path}, {acc_path}")
    return 0


def cmd_report(args) -> int:
    payload = json.loads(Path(args.input).read_text())
    rows = [tr.ResultRow(**r) for r in payload["rows"]]
    n = max((len(r.tower_top1) for r in rows), default=1)
    records = [
        tr.MetricsRecord(config=r["config"], seed=r["seed"], epochs=r["epochs"],
                         eval=r["eval"], wall_clock=r.get("wall_clock", 0.0))
        for r in payload.get("records", [])
    ]
    csv_path, json_path = tr.report(records, rows, n, args.out)
    print(f"wrote {csv_path}, {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic TPRV dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--clips-per-class", type=int, default=20)
    p.add_argument("--T", type=int, default=24)
    p.add_argument("--H", type=int, default=24)
    p.add_argument("--W", type=int, default=24)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train on a TPRV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="runs/train")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint across observation ratios")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "val"], default="val")
    p.add_argument("--out", default="")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one config axis, one run per value per seed")
    p.add_argument("--data", required=True)
    p.add_argument("--axis", required=True, choices=tr.ABLATION_AXES)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", default="runs/ablate")
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("report", help="re-emit CSV/JSON artifacts from a results JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FormatError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
