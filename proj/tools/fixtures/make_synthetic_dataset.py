#!/usr/bin/env python3
"""Generates the synthetic identity dataset under tests/data/synthetic_faces/.

Each identity is a fixed arrangement of smooth blobs (a face-like layout
with identity-specific eye spacing, mouth width and skin texture). Each
image of an identity perturbs it with a small shift, rotation, brightness
change and sensor noise. One subdirectory per identity, binary PGMs.

usage: make_synthetic_dataset.py OUT_DIR [identities] [images_per_identity]
"""
import sys
from pathlib import Path

import numpy as np

W, H = 80, 96


def identity_params(rng):
    return {
        "face_rx": rng.uniform(26, 33),
        "face_ry": rng.uniform(34, 41),
        "skin": rng.uniform(0.55, 0.8),
        "eye_dx": rng.uniform(9, 15),
        "eye_y": rng.uniform(-12, -6),
        "eye_r": rng.uniform(2.5, 4.5),
        "brow": rng.uniform(0.0, 1.0),
        "nose_len": rng.uniform(6, 12),
        "mouth_y": rng.uniform(12, 20),
        "mouth_w": rng.uniform(6, 13),
        "texture": rng.normal(0, 1, size=(12, 10)),
        "tex_gain": rng.uniform(0.04, 0.1),
    }


def render(p, rng):
    dx, dy = rng.uniform(-3, 3, size=2)
    theta = np.deg2rad(rng.uniform(-6, 6))
    gain = rng.uniform(0.85, 1.1)
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    cx, cy = W / 2 + dx, H / 2 + dy
    c, s = np.cos(theta), np.sin(theta)
    u = c * (xs - cx) + s * (ys - cy)
    v = -s * (xs - cx) + c * (ys - cy)

    img = np.full((H, W), 0.25)
    face = np.exp(-((u / p["face_rx"]) ** 2 + (v / p["face_ry"]) ** 2) ** 4)
    img = img * (1 - face) + p["skin"] * face

    # Identity texture: bilinear upsampling of a coarse noise grid.
    ty = (v + p["face_ry"]) / (2 * p["face_ry"]) * (p["texture"].shape[0] - 1)
    tx = (u + p["face_rx"]) / (2 * p["face_rx"]) * (p["texture"].shape[1] - 1)
    ty = np.clip(ty, 0, p["texture"].shape[0] - 1.001)
    tx = np.clip(tx, 0, p["texture"].shape[1] - 1.001)
    y0, x0 = ty.astype(int), tx.astype(int)
    fy, fx = ty - y0, tx - x0
    t = p["texture"]
    tex = (t[y0, x0] * (1 - fx) * (1 - fy) + t[y0, x0 + 1] * fx * (1 - fy)
           + t[y0 + 1, x0] * (1 - fx) * fy + t[y0 + 1, x0 + 1] * fx * fy)
    img += p["tex_gain"] * tex * face

    def blob(bu, bv, ru, rv, depth):
        return depth * np.exp(-(((u - bu) / ru) ** 2 + ((v - bv) / rv) ** 2))

    for side in (-1, 1):
        img -= blob(side * p["eye_dx"], p["eye_y"], p["eye_r"], p["eye_r"] * 0.7, 0.45)
        img -= blob(side * p["eye_dx"], p["eye_y"] - 6, p["eye_r"] * 1.8, 1.2, 0.25 * p["brow"])
    img -= blob(0, p["eye_y"] + p["nose_len"], 2.0, p["nose_len"] / 2, 0.12)
    img -= blob(0, p["mouth_y"], p["mouth_w"], 2.0, 0.35)

    img = gain * img + rng.normal(0, 0.015, size=img.shape)
    return np.clip(img, 0, 1)


def write_pgm(path, img):
    data = np.round(img * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (W, H))
        f.write(data.tobytes())


def main():
    out = Path(sys.argv[1])
    identities = int(sys.argv[2]) if len(sys.argv) > 2 else 6
    per_identity = int(sys.argv[3]) if len(sys.argv) > 3 else 6
    rng = np.random.default_rng(1440)
    for i in range(identities):
        p = identity_params(rng)
        d = out / f"id{i:02d}"
        d.mkdir(parents=True, exist_ok=True)
        for j in range(per_identity):
            write_pgm(d / f"{j + 1:02d}.pgm", render(p, rng))


if __name__ == "__main__":
    main()
