"""Train both networks on a generated dataset and emit evaluation inputs.

    defectnets train --manifest ds/manifest.json --out runs/r1 [--epochs 100]

writes checkpoints, the loss history, and the predictions JSON for
`circgpr evaluate`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .data import load_dataset, split_ids
from .train import TrainConfig, evaluate_end_to_end, train_dpe, train_sr


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="defectnets")
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", help="train DPE and SR networks")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log-defect-labels", action="store_true")
    t.add_argument("--circgpr-cmd", default="circgpr")
    args = parser.parse_args(argv)

    cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                      seed=args.seed, log_defect_labels=args.log_defect_labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    bundle = load_dataset(args.manifest, log_defect_labels=args.log_defect_labels)
    train_idx, test_idx = split_ids(bundle.ids, cfg.train_frac, cfg.seed)

    dpe = train_dpe(bundle, train_idx, test_idx, cfg)
    sr = train_sr(bundle, train_idx, test_idx, cfg)

    torch.save(dpe.model.state_dict(), out / "dpe.pt")
    torch.save(sr.model.state_dict(), out / "sr.pt")
    history = {
        "dpe": {"train": dpe.train_losses, "test": dpe.test_losses,
                "best_epoch": dpe.best_epoch, "best_test_loss": dpe.best_test_loss},
        "sr": {"train": sr.train_losses, "test": sr.test_losses,
               "best_epoch": sr.best_epoch, "best_test_loss": sr.best_test_loss},
        "split": {"train": [bundle.ids[i] for i in train_idx],
                  "test": [bundle.ids[i] for i in test_idx]},
    }
    (out / "history.json").write_text(json.dumps(history, indent=2))

    pred_path = evaluate_end_to_end(dpe.model, sr.model, bundle, test_idx,
                                    out / "eval", circgpr_cmd=args.circgpr_cmd)
    print(f"predictions: {pred_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
