"""Procedural face-like images with analytically known landmarks.

Desk-scale stand-in for a face database: parametric head ovals with
textured eyes, eyebrows, nose and mouth. Every identity draws its own
geometry and texture parameters, so blending two identities leaves
band-limited superposition artifacts in each facial region. Landmarks
follow the 68-point annotation and are exact by construction.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .dataset import FaceRecord
from .image import save_image
from .landmarks import LandmarkSet

DEFAULT_SIZE = 128


@dataclass
class SyntheticFace:
    image: np.ndarray      # (H, W, 1) float64
    landmarks: LandmarkSet
    params: dict


def _disk(xx, yy, cx, cy, ax, ay):
    return ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1.0


def generate_face(seed, size=DEFAULT_SIZE) -> SyntheticFace:
    """One identity: image plus exact 68-point landmarks."""
    rng = np.random.default_rng(seed)
    s = size / 128.0
    cx = size / 2.0 + rng.uniform(-2, 2) * s
    cy = size * 0.52 + rng.uniform(-2, 2) * s
    fw = rng.uniform(30, 38) * s   # face half-width
    fh = rng.uniform(40, 48) * s   # face half-height

    skin = rng.uniform(0.55, 0.80)
    bg = rng.uniform(0.10, 0.30)
    tex_fx = rng.uniform(0.15, 0.55)
    tex_fy = rng.uniform(0.15, 0.55)
    tex_ph = rng.uniform(0, 2 * np.pi)
    tex_amp = rng.uniform(0.02, 0.05)

    eye_dx = rng.uniform(0.40, 0.50) * fw
    eye_dy = rng.uniform(0.22, 0.30) * fh
    eye_w = rng.uniform(0.16, 0.22) * fw
    eye_h = rng.uniform(0.45, 0.6) * eye_w
    iris_r = rng.uniform(0.45, 0.6) * eye_w
    iris_tone = rng.uniform(0.05, 0.30)
    sclera = rng.uniform(0.85, 0.98)

    brow_dy = rng.uniform(0.50, 0.65) * eye_dy + eye_dy
    brow_w = eye_w * rng.uniform(1.2, 1.5)
    brow_lift = rng.uniform(0.05, 0.20) * eye_w
    brow_tone = rng.uniform(0.05, 0.25)
    brow_th = rng.uniform(1.2, 2.2) * s

    nose_len = rng.uniform(0.30, 0.38) * fh
    nose_w = rng.uniform(0.16, 0.24) * fw
    nose_tone = skin * rng.uniform(0.6, 0.85)

    mouth_dy = rng.uniform(0.50, 0.60) * fh
    mouth_w = rng.uniform(0.42, 0.55) * fw
    mouth_h = rng.uniform(0.22, 0.32) * mouth_w
    lip_tone = rng.uniform(0.25, 0.45)
    lip_fx = rng.uniform(0.8, 2.2)

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    img = np.full((size, size), bg)
    face = _disk(xx, yy, cx, cy, fw, fh)
    texture = tex_amp * np.sin(tex_fx * xx + tex_fy * yy + tex_ph)
    img[face] = (skin + texture)[face]

    eye_y = cy - eye_dy
    for side in (-1, 1):
        ex = cx + side * eye_dx
        eye = _disk(xx, yy, ex, eye_y, eye_w, eye_h)
        img[eye] = sclera
        iris = _disk(xx, yy, ex, eye_y, iris_r, iris_r) & eye
        rr = np.hypot(xx - ex, yy - eye_y)
        img[iris] = iris_tone + 0.15 * np.sin(rr * rng.uniform(1.5, 4.0))[iris]
        # eyebrow: thin tilted bar above the eye
        bx = xx - (cx + side * eye_dx)
        by = yy - (cy - brow_dy) + side * brow_lift * bx / max(brow_w, 1e-6)
        brow = (np.abs(bx) <= brow_w) & (np.abs(by) <= brow_th)
        img[brow] = brow_tone

    nose_top = eye_y + 0.2 * eye_dy
    nose_base_y = nose_top + nose_len
    nose = (np.abs(xx - cx) <= nose_w * (yy - nose_top) / max(nose_len, 1e-6)) & \
           (yy >= nose_top) & (yy <= nose_base_y)
    img[nose] = nose_tone + texture[nose]
    for side in (-1, 1):
        nostril = _disk(xx, yy, cx + side * 0.45 * nose_w, nose_base_y - 1.0 * s,
                        1.5 * s, 1.1 * s)
        img[nostril] = 0.15

    mouth_y = cy + mouth_dy
    mouth = _disk(xx, yy, cx, mouth_y, mouth_w, mouth_h)
    img[mouth] = lip_tone + 0.08 * np.sin(lip_fx * (xx - cx))[mouth]
    lipline = mouth & (np.abs(yy - mouth_y) <= 0.8 * s)
    img[lipline] = lip_tone * 0.5

    img = np.clip(img, 0.0, 1.0)[:, :, None]

    # ---- landmarks ------------------------------------------------------
    pts = np.zeros((68, 2))
    # jaw: left temple down around the chin to the right temple
    jaw_t = np.linspace(-0.65 * np.pi, 0.65 * np.pi, 17)
    pts[0:17] = np.stack([cx + fw * np.sin(jaw_t), cy + fh * np.cos(jaw_t)], axis=1)

    for side, sl in ((-1, slice(17, 22)), (1, slice(22, 27))):
        bx = cx + side * eye_dx
        by = cy - brow_dy
        off = np.linspace(-brow_w, brow_w, 5)
        ys = by - side * brow_lift * off / max(brow_w, 1e-6)
        pts[sl] = np.stack([bx + off, ys], axis=1)

    pts[27] = (cx, nose_top)
    pts[28] = (cx, nose_top + nose_len / 3.0)
    pts[29] = (cx, nose_top + 2.0 * nose_len / 3.0)
    pts[30] = (cx, nose_base_y - 2.0 * s)
    base_off = np.linspace(-0.8 * nose_w, 0.8 * nose_w, 5)
    pts[31:36] = np.stack([cx + base_off,
                           np.full(5, nose_base_y)], axis=1)

    # both eye contours run leftmost point, over the top, rightmost, bottom;
    # image y grows downward, hence the negated sin
    eye_angles = np.array([np.pi, 0.75 * np.pi, 0.25 * np.pi,
                           0.0, -0.25 * np.pi, -0.75 * np.pi])
    for side, sl in ((-1, slice(36, 42)), (1, slice(42, 48))):
        ex = cx + side * eye_dx
        pts[sl] = np.stack([ex + eye_w * np.cos(eye_angles),
                            eye_y - eye_h * np.sin(eye_angles)], axis=1)

    lip_angles = np.linspace(np.pi, -np.pi, 13)[:-1]
    pts[48:60] = np.stack([cx + mouth_w * np.cos(lip_angles),
                           mouth_y - mouth_h * np.sin(lip_angles)], axis=1)
    inner_angles = np.linspace(np.pi, -np.pi, 9)[:-1]
    pts[60:68] = np.stack([cx + 0.7 * mouth_w * np.cos(inner_angles),
                           mouth_y - 0.55 * mouth_h * np.sin(inner_angles)], axis=1)

    pts[:, 0] = np.clip(pts[:, 0], 1.0, size - 2.0)
    pts[:, 1] = np.clip(pts[:, 1], 1.0, size - 2.0)
    lm = LandmarkSet(pts, image_width=size, image_height=size)
    return SyntheticFace(image=img, landmarks=lm,
                         params={"seed": seed, "size": size})


def write_database(out_dir, count, seed=0, size=DEFAULT_SIZE,
                   databases=("synthA",)) -> str:
    """Render a synthetic face database and its manifest; returns the path."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = os.path.join(out_dir, "manifest.tsv")
    with open(manifest, "w", encoding="utf-8") as f:
        f.write("id\timage\tlandmarks\tgender\tdatabase\n")
        for i in range(count):
            face_seed = int(rng.integers(0, 2 ** 31))
            face = generate_face(face_seed, size=size)
            fid = f"face{i:04d}"
            img_path = os.path.join(out_dir, f"{fid}.png")
            lm_path = os.path.join(out_dir, f"{fid}.lms")
            save_image(face.image, img_path)
            with open(lm_path, "w", encoding="utf-8") as g:
                for x, y in face.landmarks.points:
                    g.write(f"{x:.4f} {y:.4f}\n")
            gender = "M" if i % 2 == 0 else "F"
            db = databases[i % len(databases)]
            f.write(f"{fid}\t{fid}.png\t{fid}.lms\t{gender}\t{db}\n")
    return manifest


def load_face(record: FaceRecord, base_dir):
    """Load (image, landmarks) for a manifest record."""
    from .image import load_image
    from .landmarks import parse_landmarks
    img_path = record.image if os.path.isabs(record.image) \
        else os.path.join(base_dir, record.image)
    lm_path = record.landmarks if os.path.isabs(record.landmarks) \
        else os.path.join(base_dir, record.landmarks)
    img = load_image(img_path)
    lm = parse_landmarks(lm_path, (img.shape[1], img.shape[0]))
    return img, lm
