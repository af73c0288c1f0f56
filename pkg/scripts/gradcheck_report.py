"""Finite-difference gradient check of every layer type, in float64.

Prints the worst relative error per parameter. Parameters are randomized
(biases included) so no ReLU input sits exactly on its kink.
"""

import argparse

import numpy as np

from grcnet.nn import Conv2d, CotLayer, GRCNet, InceptionBlock, MLPHead, ModelConfig, ResidualUnit
from grcnet.nn.gradcheck import check_layer

CASES = {
    "conv2d 3x3": (lambda r: Conv2d.init(r, 3, 4, 4), (2, 8, 8, 4)),
    "conv2d stride 2": (lambda r: Conv2d.init(r, 3, 4, 4, stride=2), (1, 8, 8, 4)),
    "residual unit": (lambda r: ResidualUnit.init(r, 4, 4, affine=True), (1, 8, 8, 4)),
    "residual unit (projection)": (lambda r: ResidualUnit.init(r, 2, 4), (1, 6, 6, 2)),
    "inception block": (lambda r: InceptionBlock.init(r, 4, (2, 2, 2, 2)), (1, 6, 6, 4)),
    "mlp head": (lambda r: MLPHead.init(r, 4, 8, 5), (2, 8, 8, 4)),
    "cot layer": (lambda r: CotLayer.init(r, 4), (1, 6, 6, 4)),
    "cot layer (2 heads, C=8)": (lambda r: CotLayer.init(r, 8, heads=2), (1, 5, 5, 8)),
    "full model": (
        lambda r: GRCNet(ModelConfig(input_size=(8, 8, 1), stem_channels=4,
                                     inception_branch_widths=(2, 2, 2, 2), mlp_hidden=6)),
        (2, 8, 8, 1),
    ),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--step", type=float, default=1e-4)
    ap.add_argument("--verbose", action="store_true", help="print every parameter")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    overall = 0.0
    for title, (make, shape) in CASES.items():
        layer = make(rng)
        for _, p in layer.named_parameters():
            p[...] = rng.standard_normal(p.shape) * 0.5
        x = rng.standard_normal(shape)
        errors = check_layer(layer, x, np.random.default_rng(args.seed), args.step)
        worst = max(errors, key=errors.get)
        overall = max(overall, errors[worst])
        print(f"{title:<28} worst {errors[worst]:.2e}  ({worst})")
        if errors[worst] > 1e-4:
            # a ReLU input within +-step of zero makes the difference quotient straddle the kink
            fine = check_layer(layer, x, np.random.default_rng(args.seed), args.step / 100)
            print(f"{'':<28} step {args.step / 100:.0e}: worst {max(fine.values()):.2e}"
                  " (large error at the coarse step only means a kink was crossed)")
        if args.verbose:
            for name, err in errors.items():
                print(f"    {name:<40} {err:.2e}")
    print(f"overall worst relative error {overall:.2e} (tolerance 1e-4)")


if __name__ == "__main__":
    main()
