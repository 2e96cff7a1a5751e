"""Forge a small gallery of morphs from two procedural faces.

Generates a pair of synthetic faces, morphs them with both warping
backends, and composes a partial morph that swaps only the nose region
into a genuine carrier. Output lands in demos/output/gallery/.
"""

import os

from morphforge.blend import compose_from_aligned
from morphforge.image import save_image
from morphforge.regions import RegionId, compose_partial
from morphforge.synthetic import generate_face
from morphforge.warp import morph_align

OUT = os.path.join(os.path.dirname(__file__), "output", "gallery")


def main():
    os.makedirs(OUT, exist_ok=True)
    a = generate_face(11)
    b = generate_face(42)
    save_image(a.image, os.path.join(OUT, "face_a.png"))
    save_image(b.image, os.path.join(OUT, "face_b.png"))

    for method in ("triangle", "field"):
        warped_a, warped_b, lm = morph_align(a.image, b.image,
                                             a.landmarks, b.landmarks, method)
        morph = compose_from_aligned(warped_a, warped_b, lm)
        save_image(morph, os.path.join(OUT, f"morph_{method}.png"))
        print(f"{method:8s} morph written")

        # partial morph: genuine carrier, only the nose comes from the morph
        partial = compose_partial(morph, warped_a, lm,
                                  frozenset({RegionId.NOSE}))
        save_image(partial, os.path.join(OUT, f"partial_nose_{method}.png"))
        print(f"{method:8s} nose-only partial written")

    print(f"gallery in {OUT}")


if __name__ == "__main__":
    main()
