"""The toy grid detector, its matched-filter calibration, and gradients.

Shows the detector contract in action: per-cell detections, the calibrated
response gap between sprite and background cells, the attack losses, and a
finite-difference audit of the whole analytic backward path.
"""

import numpy as np

from bgattack import (LossWeights, box_loss, generate_scene, grad_total,
                      make_sprite, matched_filter_init, objectness_loss)
from bgattack.gradcheck import run_all
from bgattack.scene import IDENTITY_PA

sprite = make_sprite("disk", 16, class_id=0)
detector = matched_filter_init(sprite, cell_size=16, num_classes=1, seed=19)
scene = generate_scene(100, [sprite], (64, 64, 3), 0.5,
                       place_align=16, place_offset=0)

detections = detector.forward(scene.image)
print(f"{len(detections.detections)} candidate detections (one per 16x16 cell)")
ranked = sorted(detections.detections, key=lambda d: -d.objectness)
print("top cell objectness:", round(ranked[0].objectness, 4),
      "| next:", round(ranked[1].objectness, 4),
      "| calibrated gap sigma(+4) vs sigma(-2)")
print("best box:", tuple(round(v, 1) for v in ranked[0].box),
      "ground truth:", scene.ground_truth[0])

l_obj, _ = objectness_loss(detections)
l_box, _ = box_loss(detections)
print(f"\nlosses on the clean scene: objectness {l_obj:.4f}, box {l_box:.2f}")

# full chain gradient: physical adaptation -> composition -> detector ->
# losses, differentiated back to the perturbation
p = np.random.default_rng(0).uniform(0.2, 0.8, (64, 64, 3))
br = grad_total(scene, p, detector, IDENTITY_PA, LossWeights(), iteration=1)
mask = np.repeat(scene.object_mask, 3, axis=2) == 1.0
print(f"total {br.total:.4f} = l_obj {br.l_obj:.4f} "
      f"+ 9*l_tv {9 * br.l_tv:.4f} + 0.01*l_box {0.01 * br.l_box:.4f}")

# with the smoothness term off, the only gradient source is the detector,
# and the object region receives exactly none of it
br0 = grad_total(scene, p, detector, IDENTITY_PA, LossWeights(eta=0.0),
                 iteration=1)
print("adversarial gradient on object pixels is exactly zero:",
      bool(np.all(br0.grad_p[mask] == 0.0)))

print("\nfinite-difference audit (16x16 instances, step 1e-6):")
for name, err in run_all(size=16, seed=7).items():
    print(f"  {name:<22} max rel err {err:.2e}")
