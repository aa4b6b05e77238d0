"""Regenerate the shipped model files under models/."""

import argparse
import json
from pathlib import Path

from masonry_modal.builders import arch_document, beam_document, toy2dof_document, tower_document
from masonry_modal.model import load_model
from masonry_modal.updating import UpdateSpec, model_frequencies

MODELS = {
    "beam60": beam_document,
    "toy2dof": toy2dof_document,
    "arch": arch_document,
    "tower": tower_document,
}

# on-grid parameters used to synthesize the tower update targets
TOWER_TRUE = (5.0e9, 2000.0)
GRID = {"young": {"min": 3.0e9, "max": 7.0e9, "step": 0.5e9}, "density": {"min": 1800.0, "max": 2200.0, "step": 100.0}}


def tower_spec(model, mode, n_targets=4):
    probe = UpdateSpec(targets=(1.0,) * n_targets, mode=mode)
    f = model_frequencies(model, *TOWER_TRUE, probe)
    return {"targets": [float(v) for v in f], **GRID, "mode": mode, "material": "masonry", "load_case": "self_weight"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "models"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in MODELS.items():
        doc = build()
        load_model(doc)  # validate before writing
        path = out / f"{name}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {path}")
    tower = load_model(out / "tower.json")
    for mode in ("linear", "damaged"):
        path = out / f"tower_update_{mode}.json"
        path.write_text(json.dumps(tower_spec(tower, mode), indent=1) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
