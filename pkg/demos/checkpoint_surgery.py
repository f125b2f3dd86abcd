"""Weight checkpoints: byte-exact round trips and prefix transplants.

The binary format stores named float32 tensors. This script saves a trained
motion model, reloads it, proves the bytes survive a rewrite, then grafts
one model's first layer into another and shows the report of what moved.

Run: python3 demos/checkpoint_surgery.py
"""

import tempfile
from pathlib import Path

import numpy as np

from voskit.checkpoint import ParamStore, load, save, transplant
from voskit.motion_mlp import MotionPredictor


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="checkpoint-demo-"))
    donor_path = workdir / "donor.tvck"
    target_path = workdir / "target.tvck"

    donor = MotionPredictor.for_frame(480, 854, seed=1)
    target = MotionPredictor.for_frame(480, 854, seed=2)
    save(ParamStore.from_items(donor.param_items()), donor_path)
    save(ParamStore.from_items(target.param_items()), target_path)

    store = load(donor_path)
    print("entries in the donor checkpoint:")
    for name, value in store.items():
        print(f"  {name:18s} shape {value.shape}")

    rewritten = workdir / "rewritten.tvck"
    save(store, rewritten)
    print(f"\nround trip byte-exact: {donor_path.read_bytes() == rewritten.read_bytes()}")

    merged, report = transplant(load(target_path), store, "pt.layer0.")
    print("\ntransplant 'pt.layer0.' from donor into target:")
    for line in report.lines():
        print(f"  {line}")

    d0 = store.get("pt.layer0.weight")
    m0 = merged.get("pt.layer0.weight")
    m1 = merged.get("pt.layer1.weight")
    t1 = load(target_path).get("pt.layer1.weight")
    print(f"\nlayer0 now matches donor:  {np.array_equal(m0, d0)}")
    print(f"layer1 still from target:  {np.array_equal(m1, t1)}")

    again, _ = transplant(merged, store, "pt.layer0.")
    print(f"transplant is idempotent:  {again == merged}")

    print(f"\nartifacts left in {workdir} for inspection")


if __name__ == "__main__":
    main()
