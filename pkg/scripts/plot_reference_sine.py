"""Plot the ABBA string of a z-normalised sine with its polygonal and patched reconstructions."""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from symforecast import abba
from symforecast.harness.experiments import reference_sine
from symforecast.series import znormalize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=int, default=2000)
    ap.add_argument("--periods", type=int, default=7)
    ap.add_argument("--tol", type=float, default=0.1)
    ap.add_argument("--out", default="reference_sine.svg")
    args = ap.parse_args()

    t = znormalize(np.sin(np.linspace(0.0, 2 * np.pi * args.periods, args.length)))[0]
    rep = reference_sine(args.length, args.periods, args.tol)
    print(f"m={len(rep)} k={rep.k} string={rep.string}")

    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(t, color="0.6", lw=2, label="series")
    ax.plot(abba.inverse_transform(rep, "polygonal"), lw=1, label="polygonal")
    ax.plot(abba.inverse_transform(rep, "patched"), lw=1, ls="--", label="patched")
    for x, sym in zip(rep.chain.breakpoints[:-1], rep.string):
        ax.text(x, 1.15, sym, fontsize=8)
    ax.set_ylim(-1.5, 1.4)
    ax.legend(loc="lower left", fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, format="svg")


if __name__ == "__main__":
    main()
