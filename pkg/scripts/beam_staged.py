"""Staged beam run: frequency ratios per increment, final MAC and crack profile."""

import argparse
from pathlib import Path

import numpy as np

from masonry_modal import assembly as asm
from masonry_modal.modal import cracked_area_profile, mac_matrix, prestressed_modal, write_matrix_csv
from masonry_modal.model import load_model

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default=ROOT / "models" / "beam60.json", type=Path)
    ap.add_argument("--modes", type=int, default=6)
    ap.add_argument("--out", type=Path, default=None, help="write mac.csv and profile.csv here")
    args = ap.parse_args()

    model = load_model(args.model)
    res = prestressed_modal(model, model.load_case("staged"), n_modes=args.modes)
    lin = res.linear.frequencies
    print("linear (Hz): " + " ".join(f"{f:8.3f}" for f in lin))
    for st, m in res.increments:
        print(f"{st.step:>16s} {st.increment:3d}  " + " ".join(f"{r:6.3f}" for r in m.frequencies / lin))

    mac = mac_matrix(res.linear.shapes, res.damaged.shapes, asm.assemble_mass(model))
    print("\nMAC linear (rows) vs damaged (cols)")
    for row in mac:
        print(" ".join(f"{v:5.2f}" for v in row))

    prof = cracked_area_profile(res.state)
    cracked = prof.ratio > 0
    if cracked.any():
        print(f"\ncracked sections span x = {prof.x[cracked].min():.2f} .. {prof.x[cracked].max():.2f} m, "
              f"peak ratio {prof.ratio.max():.3f}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        write_matrix_csv(mac, args.out / "mac.csv")
        np.savetxt(args.out / "profile.csv", np.column_stack([prof.x, prof.ratio]), delimiter=",",
                   header="x_m,cracked_ratio", comments="")


if __name__ == "__main__":
    main()
