"""One image set, one SNR: a row per image.

Pass PGM files (e.g. the classic boat, barbara, cameraman, mandrill, peppers,
house) or fall back to the scikit-image samples.
"""

import argparse
import os

from _images import SAMPLES, load

from cofib.bench import box_downsample, emit_csv, run_image_set
from cofib.pipeline import DenoiseConfig

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("images", nargs="*", default=list(SAMPLES))
ap.add_argument("--side", type=int, default=256, help="box-downsample to this side first (0 = keep)")
ap.add_argument("--snr", type=float, default=20.0)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--out", default="image_set.csv")
args = ap.parse_args()

images = {}
for src in args.images:
    img = load(src)
    images[os.path.splitext(os.path.basename(src))[0]] = box_downsample(img, args.side) if args.side else img
records = run_image_set(images, args.snr, DenoiseConfig(), args.seed)
emit_csv(records, args.out)
for r in records:
    print(f"{r.image_name:12s} PSNR {r.psnr_noisy:6.2f} -> {r.psnr_denoised:6.2f}  "
          f"SSIM {r.ssim_noisy:.3f} -> {r.ssim_denoised:.3f}")
