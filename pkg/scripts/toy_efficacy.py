"""Train the mask-augmented config on the synthetic corpus and report conversion efficacy.

    python scripts/toy_efficacy.py --out /tmp/toy [--scale 100 --iters 2000]
"""
import argparse
from pathlib import Path

import numpy as np

from dysvc.synth import SynthConfig, synth_corpus
from dysvc.toy import EfficacyConfig, run_efficacy


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("toy_efficacy"))
    p.add_argument("--variant", default=EfficacyConfig.variant)
    p.add_argument("--scale", type=float, default=EfficacyConfig.scale)
    p.add_argument("--iters", type=int, default=EfficacyConfig.n_iters)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()

    corpus = a.out / "corpus"
    if not (corpus / "corpus.json").exists():
        synth_corpus(corpus, SynthConfig(seed=a.seed))
    res = run_efficacy(corpus, EfficacyConfig(variant=a.variant, scale=a.scale, n_iters=a.iters, seed=a.seed))
    print(f"trained {a.variant} for {a.iters} iterations in {res.seconds:.0f} s")
    print(f"closer to target: {sum(res.closer)}/{len(res.closer)} ({100 * res.closer_fraction:.0f}%)")
    print(f"generator loss: early {res.early_loss:.3f}, late {res.late_loss:.3f}, ratio {res.loss_ratio:.3f}")
    for name in ("g_adv", "g_adv2", "cycle", "identity", "g_total"):
        s = res.result.series(name)
        if len(s):
            print(f"  {name:8s} first 50 {s[:50].mean():.3f}  last 50 {s[-50:].mean():.3f}")
    np.savetxt(a.out / "g_total.txt", res.result.series("g_total"))


if __name__ == "__main__":
    main()
