"""Write seeded random model files (the bundled verify model and examples of each family)."""

import argparse
from pathlib import Path

import numpy as np

from relu_unwrap.generators import random_feedforward, random_gcn, random_tensor
from relu_unwrap.io import save_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="models")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    meta = {"seed": args.seed, "generator": "scripts/make_models.py"}
    save_model(random_feedforward(rng, [3, 4, 4, 2]), out / "ff_3_4_4_2.json", meta)
    save_model(random_gcn(rng, 3, [2, 3, 2]), out / "gcn_k3_2_3_2.json", meta)
    save_model(random_tensor(rng, [(2, 2, 2)] * 3), out / "tensor_222.json", meta)
    print(f"wrote models to {out}/")


if __name__ == "__main__":
    main()
