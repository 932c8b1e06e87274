"""Writes small JPEG fixtures for the image decoder tests."""
from pathlib import Path

import numpy as np
from PIL import Image

out = Path(__file__).resolve().parents[2] / "tests" / "data" / "io"
out.mkdir(parents=True, exist_ok=True)

gray = np.tile(np.linspace(0, 255, 32).round().astype(np.uint8), (16, 1))
Image.fromarray(gray, "L").save(out / "gradient_gray.jpg", quality=100)

rgb = np.zeros((16, 32, 3), np.uint8)
rgb[..., 0] = 200
rgb[..., 1] = 100
rgb[..., 2] = 50
Image.fromarray(rgb, "RGB").save(out / "flat_rgb.jpg", quality=100)
