"""Transfer fidelity against pulse-area error and herald timing jitter."""

import argparse

from ionabsorb.sim import stream_rng
from ionabsorb.transfer import TransferConfig, jitter_dephasing_factor, transfer_fidelity_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--inputs", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("area_err  jitter_ns  F_mean    F_err     p_success  coherence")
    k = 0
    for err in (0.0, 0.01, 0.05, 0.1):
        for jit in (0.0, 1e-9, 5e-9, 20e-9):
            cfg = TransferConfig(pulse_area_error=err, jitter_fwhm=jit, detection_efficiency_393=0.1)
            r = transfer_fidelity_experiment(cfg, args.inputs, stream_rng(args.seed, k))
            k += 1
            print(f"{err:8.2f}  {jit * 1e9:9.1f}  {r.mean_fidelity:.5f}  {r.fidelity_error:.5f}  "
                  f"{r.success_probability:9.4f}  {jitter_dephasing_factor(cfg.zeeman_splitting, jit):.5f}")
    r = transfer_fidelity_experiment(TransferConfig(phase_tracking=False), args.inputs, stream_rng(args.seed, k))
    print(f"no phase tracking: F = {r.mean_fidelity:.4f} (Haar average of a random phase: 2/3)")


if __name__ == "__main__":
    main()
