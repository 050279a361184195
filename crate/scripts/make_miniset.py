#!/usr/bin/env python3
"""Regenerates the bundled evaluation mini-set and the toy training corpus.

Outputs (relative to the repository root):
  crates/core/tests/fixtures/miniset/images/*.png       20 images
  crates/core/tests/fixtures/miniset/annotations/*.xml  VOC-style boxes
  crates/core/tests/fixtures/miniset/single_object.txt  ids of the clean one-object scenes
  crates/core/tests/fixtures/toy/images/*.png           10 training images
  crates/core/tests/fixtures/toy/masks/*.png            binary object masks

Photo boxes were drawn by hand on 200-px thumbnails of scikit-image's sample
photos; the horse box is taken from its silhouette.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data, img_as_ubyte, transform

ROOT = Path(__file__).resolve().parents[1] / "crates" / "core" / "tests" / "fixtures"
W, H = 160, 120


def ellipse_mask(cx, cy, rx, ry, w=W, h=H):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def mask_box(mask):
    ys, xs = np.nonzero(mask)
    return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())


def render(background, layers, rng, noise):
    img = np.empty((H, W, 3), dtype=np.float64)
    img[:] = background
    for mask, color in layers:
        img[mask] = color
    if noise > 0:
        img += rng.normal(0.0, noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_voc(path, image_id, size, objects):
    w, h = size
    parts = [
        "<annotation>",
        f"  <filename>{image_id}.png</filename>",
        f"  <size><width>{w}</width><height>{h}</height><depth>3</depth></size>",
    ]
    for name, (x0, y0, x1, y1) in objects:
        parts += [
            "  <object>",
            f"    <name>{name}</name>",
            "    <difficult>0</difficult>",
            f"    <bndbox><xmin>{x0}</xmin><ymin>{y0}</ymin><xmax>{x1}</xmax><ymax>{y1}</ymax></bndbox>",
            "  </object>",
        ]
    parts.append("</annotation>")
    path.write_text("\n".join(parts) + "\n")


# (cx, cy, rx, ry, object colour, background colour)
SINGLE = [
    (80, 60, 35, 28, (220, 40, 40), (30, 30, 30)),
    (60, 55, 25, 40, (240, 240, 240), (20, 40, 90)),
    (95, 65, 45, 30, (30, 160, 60), (230, 220, 200)),
    (80, 60, 22, 22, (250, 200, 30), (40, 40, 60)),
    (70, 50, 40, 35, (20, 20, 20), (200, 200, 210)),
    (100, 70, 30, 38, (60, 90, 230), (235, 235, 225)),
    (75, 62, 50, 25, (200, 60, 200), (25, 60, 25)),
    (85, 58, 28, 45, (250, 140, 30), (15, 15, 15)),
]

# each entry: background, list of (shape, params, colour)
MULTI = [
    ((30, 30, 40), [("ellipse", (45, 45, 25, 20), (220, 60, 60)), ("ellipse", (115, 80, 28, 24), (60, 200, 90))]),
    ((225, 225, 215), [("ellipse", (40, 35, 22, 18), (30, 30, 120)), ("rect", (85, 55, 55, 45), (160, 30, 30)), ("ellipse", (40, 90, 20, 16), (20, 120, 40))]),
    ((50, 50, 50), [("rect", (15, 20, 50, 40), (230, 230, 60)), ("ellipse", (115, 70, 30, 35), (80, 160, 240))]),
    ((200, 210, 230), [("ellipse", (50, 60, 35, 30), (120, 40, 20)), ("ellipse", (125, 40, 20, 20), (20, 20, 20)), ("ellipse", (130, 95, 18, 14), (240, 120, 20))]),
]

PHOTOS = {
    "photo_chelsea": ("chelsea", [("cat", (0, 0, 162, 132))]),
    "photo_coffee": ("coffee", [("cup", (26, 6, 160, 124))]),
    "photo_astronaut": ("astronaut", [("person", (10, 6, 140, 199)), ("helmet", (110, 135, 197, 199)), ("shuttle", (139, 0, 179, 110))]),
    "photo_camera": ("camera", [("person", (0, 25, 128, 199)), ("tripod", (90, 117, 160, 199))]),
    "photo_rocket": ("rocket", [("rocket", (95, 40, 106, 130))]),
    "photo_horse": ("horse", None),
    "photo_coins": ("coins", [("coin", b) for b in [
        (11, 19, 35, 39), (41, 20, 62, 39), (69, 15, 93, 39), (100, 15, 125, 38), (132, 17, 155, 37), (159, 8, 187, 37),
        (12, 54, 35, 75), (44, 54, 64, 75), (70, 54, 90, 75), (96, 54, 119, 75), (127, 50, 154, 75), (165, 55, 186, 75),
        (12, 90, 32, 112), (41, 90, 65, 112), (70, 90, 90, 112), (99, 89, 124, 114), (130, 90, 155, 112), (164, 81, 198, 114),
        (9, 121, 39, 150), (47, 127, 71, 150), (75, 122, 104, 150), (114, 125, 140, 150), (143, 125, 170, 150), (174, 129, 195, 150),
    ]]),
    "photo_retina": ("retina", [("fundus", (2, 1, 197, 199)), ("optic_disc", (16, 80, 46, 108))]),
}


def thumbnail(name):
    im = np.asarray(getattr(data, name)())
    if im.dtype == bool:
        im = im.astype(np.uint8) * 255
    if im.ndim == 2:
        im = np.stack([im] * 3, axis=-1)
    im = im[..., :3]
    h, w = im.shape[:2]
    s = 200 / max(h, w)
    return img_as_ubyte(transform.resize(im, (round(h * s), round(w * s)), anti_aliasing=True))


def make_miniset(rng):
    img_dir = ROOT / "miniset" / "images"
    ann_dir = ROOT / "miniset" / "annotations"
    img_dir.mkdir(parents=True, exist_ok=True)
    ann_dir.mkdir(parents=True, exist_ok=True)
    singles = []
    for k, (cx, cy, rx, ry, fg, bg) in enumerate(SINGLE):
        image_id = f"synth_single_{k:02d}"
        m = ellipse_mask(cx, cy, rx, ry)
        Image.fromarray(render(bg, [(m, fg)], rng, 3.0)).save(img_dir / f"{image_id}.png")
        write_voc(ann_dir / f"{image_id}.xml", image_id, (W, H), [("blob", mask_box(m))])
        singles.append(image_id)
    for k, (bg, shapes) in enumerate(MULTI):
        image_id = f"synth_multi_{k:02d}"
        layers, objects = [], []
        for shape, p, color in shapes:
            if shape == "ellipse":
                m = ellipse_mask(*p)
            else:
                x, y, w, h = p
                m = np.zeros((H, W), dtype=bool)
                m[y:y + h, x:x + w] = True
            layers.append((m, color))
            objects.append((shape, mask_box(m)))
        Image.fromarray(render(bg, layers, rng, 3.0)).save(img_dir / f"{image_id}.png")
        write_voc(ann_dir / f"{image_id}.xml", image_id, (W, H), objects)
    for image_id, (name, objects) in PHOTOS.items():
        im = thumbnail(name)
        if objects is None:
            objects = [("horse", mask_box(im[..., 0] < 128))]
        Image.fromarray(im).save(img_dir / f"{image_id}.png")
        write_voc(ann_dir / f"{image_id}.xml", image_id, (im.shape[1], im.shape[0]), objects)
    (ROOT / "miniset" / "single_object.txt").write_text("\n".join(singles) + "\n")


def make_toy(rng):
    img_dir = ROOT / "toy" / "images"
    mask_dir = ROOT / "toy" / "masks"
    img_dir.mkdir(parents=True, exist_ok=True)
    mask_dir.mkdir(parents=True, exist_ok=True)
    for k in range(10):
        bg = rng.integers(20, 235, size=3).astype(np.float64)
        fg = np.where(bg > 128, bg - rng.integers(150, 200, size=3), bg + rng.integers(150, 200, size=3))
        fg = np.clip(fg, 0, 255)
        cx, cy = rng.integers(55, 105), rng.integers(45, 75)
        rx, ry = rng.integers(20, 40), rng.integers(18, 32)
        obj = ellipse_mask(cx, cy, rx, ry)
        img = np.empty((H, W, 3))
        img[:] = bg
        # faint background stripes give weak, non-object edgelets
        yy, xx = np.mgrid[0:H, 0:W]
        period = rng.integers(14, 24)
        stripes = ((xx + (yy if k % 2 else 0)) // period) % 2 == 1
        img[stripes & ~obj] += np.where(bg > 128, -45.0, 45.0)
        img[obj] = fg
        img += rng.normal(0.0, 3.0, img.shape)
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
        Image.fromarray(img).save(img_dir / f"toy_{k:02d}.png")
        Image.fromarray(obj.astype(np.uint8) * 255).save(mask_dir / f"toy_{k:02d}.png")


def main():
    rng = np.random.default_rng(20240601)
    make_miniset(rng)
    make_toy(rng)


if __name__ == "__main__":
    main()
