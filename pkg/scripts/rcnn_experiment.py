"""Calibration run for the thickness regressor: accuracy vs the two baselines."""

import time

import numpy as np

from layermet.measure import orthogonal_report, three_line_report
from layermet.metrics import mse
from layermet.nnet import TrainConfig, predict_thickness, train_rcnn
from layermet.synth import SynthRanges, generate_batch


def main():
    t0 = time.time()
    ranges = SynthRanges(
        width=96,
        height=96,
        thickness=(8.0, 18.0),
        tilt_deg=(-30.0, 30.0),
        curvature=(0.0, 0.0),
        noise=(0.0, 0.0),
        blur_radius=(0, 0),
    )
    n_train, n_test = 64, 40
    samples = generate_batch(n_train + n_test, ranges, seed=77)
    masks = [s.truth_mask for s in samples]
    targets = [orthogonal_report(m).mean for m in masks]
    three = [three_line_report(m).mean for m in masks]
    tilts = [abs(s.spec.tilt_deg) for s in samples]
    print(f"data ready {time.time() - t0:.1f}s", flush=True)

    train = list(zip(masks[:n_train], targets[:n_train]))
    cfg = TrainConfig(batch_size=4, epochs=60, learning_rate=1e-4, seed=0)
    t1 = time.time()
    model, losses = train_rcnn(train, cfg)
    print(f"{cfg.epochs} epochs in {time.time() - t1:.1f}s", flush=True)
    print("loss curve:", " ".join(f"{l:.3f}" for l in losses[::8]), flush=True)

    train_preds = [predict_thickness(model, masks[i]) for i in range(n_train)]
    bias = float(np.mean([p - targets[i] for i, p in enumerate(train_preds)]))
    print(f"infer-mode bias on train: {bias:+.3f} px  train MSE {mse(train_preds, targets[:n_train]):.4f}")

    test_idx = list(range(n_train, len(samples)))
    preds = [predict_thickness(model, masks[i]) for i in test_idx]
    refs = [targets[i] for i in test_idx]
    model_mse = mse(preds, refs)
    baseline = mse([float(np.mean(targets[:n_train]))] * len(refs), refs)
    tilted = [i for i in test_idx if tilts[i] >= 10.0]
    model_tilted = mse([preds[test_idx.index(i)] for i in tilted], [targets[i] for i in tilted])
    three_tilted = mse([three[i] for i in tilted], [targets[i] for i in tilted])
    print(f"test MSE={model_mse:.4f}  baseline={baseline:.4f} (need <= {0.5 * baseline:.4f})")
    print(f"tilted subset ({len(tilted)}): model={model_tilted:.4f}  three-line={three_tilted:.4f}")
    print(f"total {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
