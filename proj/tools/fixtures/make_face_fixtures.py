#!/usr/bin/env python3
"""Builds the annotated face fixtures under tests/data/faces/.

Sources are two public-domain portraits:
  astronaut.png    NASA portrait of Eileen Collins (ships with scikit-image)
  grace_hopper.jpg US Navy portrait of Grace Hopper (ships with matplotlib)

Face boxes were annotated by hand on the source images and are carried
through every transform analytically. Output: grayscale binary PGMs and
annotations.csv (file,x,y,w,h).

usage: make_face_fixtures.py ASTRONAUT GRACE_HOPPER OUT_DIR
"""
import csv
import sys
from pathlib import Path

import numpy as np
from PIL import Image

# Hand annotations on the original sources: (x, y, w, h).
SOURCES = {
    "astronaut": (168, 72, 110, 110),
    "hopper": (170, 150, 190, 190),
}


def load_gray(path):
    return np.asarray(Image.open(path).convert("L"), dtype=np.float64)


def resize(img, box, scale):
    h, w = img.shape
    nw, nh = int(round(w * scale)), int(round(h * scale))
    out = Image.fromarray(img.astype(np.uint8)).resize((nw, nh), Image.BILINEAR)
    x, y, bw, bh = box
    return np.asarray(out, dtype=np.float64), (x * scale, y * scale, bw * scale, bh * scale)


def crop(img, box, x0, y0, cw, ch):
    x, y, bw, bh = box
    return img[y0:y0 + ch, x0:x0 + cw].copy(), (x - x0, y - y0, bw, bh)


def mirror(img, box):
    x, y, bw, bh = box
    return img[:, ::-1].copy(), (img.shape[1] - x - bw, y, bw, bh)


def paste(img, box, canvas_w, canvas_h, ox, oy, rng):
    canvas = rng.uniform(90, 160, size=(canvas_h, canvas_w))
    canvas = np.asarray(Image.fromarray(canvas.astype(np.uint8)).resize(
        (canvas_w // 8, canvas_h // 8)).resize((canvas_w, canvas_h), Image.BILINEAR), dtype=np.float64)
    h, w = img.shape
    canvas[oy:oy + h, ox:ox + w] = img
    x, y, bw, bh = box
    return canvas, (x + ox, y + oy, bw, bh)


def orl_crop(img, box):
    """Tight head crop at 92x112, the ORL frame geometry."""
    x, y, bw, bh = box
    cx, cy = x + bw / 2, y + bh / 2
    # ORL faces span roughly 65% of the frame width.
    cw = bw / 0.65
    ch = cw * 112 / 92
    x0, y0 = int(round(cx - cw / 2)), int(round(cy - ch * 0.47))
    sub, sbox = crop(img, box, x0, y0, int(round(cw)), int(round(ch)))
    s = 92 / sub.shape[1]
    out = Image.fromarray(sub.astype(np.uint8)).resize((92, 112), Image.BILINEAR)
    sx, sy, sw, sh = sbox
    return np.asarray(out, dtype=np.float64), (sx * s, sy * 112 / sub.shape[0], sw * s, sh * 112 / sub.shape[0])


def write_pgm(path, img):
    data = np.clip(np.round(img), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def main():
    astronaut, hopper, out = sys.argv[1], sys.argv[2], Path(sys.argv[3])
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20181)
    src = {
        "astronaut": (load_gray(astronaut), SOURCES["astronaut"]),
        "hopper": (load_gray(hopper), SOURCES["hopper"]),
    }
    fixtures = []
    for name, (img, box) in src.items():
        half, hbox = resize(img, box, 0.5)
        fixtures.append((f"{name}_half", half, hbox))
        fixtures.append((f"{name}_mirror", *mirror(half, hbox)))
        fixtures.append((f"{name}_orl", *orl_crop(img, box)))
        fixtures.append((f"{name}_orl_mirror", *mirror(*orl_crop(img, box))))
    a_small, a_box = resize(*src["astronaut"], 0.35)
    fixtures.append(("astronaut_pasted", *paste(a_small, a_box, 300, 240, 97, 41, rng)))
    h_half, h_box = resize(*src["hopper"], 0.5)
    fixtures.append(("hopper_lowcontrast", 60 + 0.45 * h_half, h_box))
    a_half, ab = resize(*src["astronaut"], 0.5)
    fixtures.append(("astronaut_noisy", a_half + rng.normal(0, 6.0, a_half.shape), ab))
    fixtures.append(("hopper_dark", 0.55 * h_half, h_box))

    with open(out / "annotations.csv", "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["file", "x", "y", "w", "h"])
        for name, img, (x, y, w, h) in fixtures:
            write_pgm(out / f"{name}.pgm", img)
            wr.writerow([f"{name}.pgm", round(x), round(y), round(w), round(h)])


if __name__ == "__main__":
    main()
