"""Regenerate the bundled synthetic trajectory.

Run from the repository root::

    python3 scripts/generate_synthetic_trajectory.py

The interpolation itself lives in :func:`flashest.harness.synthetic_trajectory`.
"""

from pathlib import Path

from flashest.harness import save_trajectory, synthetic_trajectory

SOURCE = (
    "SYNTHETIC: not measured data. Anchored at the 3000 P/E ground-truth vector; "
    "s = (pe + 1000) / 4000, lambda scales with s, gamma_sigma_r and gamma_mu_r "
    "with sqrt(s), sigma_p and sigma_e constant."
)

if __name__ == "__main__":
    out = Path(__file__).resolve().parents[1] / "src" / "flashest" / "data" / "synthetic_trajectory.json"
    save_trajectory(out, synthetic_trajectory(), source=SOURCE)
    print(f"wrote {out}")
