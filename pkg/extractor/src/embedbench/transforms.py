"""The transformation suite used to stress-test hash robustness.

Every transformed image goes through a fixed base stage simulating a
screenshot (central crop keeping 60% per axis, then JPEG recompression
at quality 30 with 4:2:0 subsampling), one named variant, and a post
stage (random square erase covering 20% of the shorter side plus an
overlay of 10 random alphanumeric characters).  All randomness derives
from the spec seed and the image filename, so a run is deterministic and
order-independent; the emitted manifest records every drawn parameter.
"""

from __future__ import annotations

import dataclasses
import io
import json
import random
import string
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw, ImageEnhance, ImageFilter, ImageFont

VARIANTS = ("none", "brightness", "contrast", "blur", "median")

_FONT_PATH = Path(__file__).parent / "fonts" / "DejaVuSans.ttf"


@dataclass(frozen=True)
class TransformSpec:
    """Parameters of one benchmark condition.

    Defaults are the published operating point; the invariant checks keep
    any override inside the ranges the benchmark is defined for.
    """

    variant: str = "none"
    seed: int = 0
    crop_fraction: float = 0.20     # removed from each side
    jpeg_quality: int = 30
    brightness_range: float = 0.30  # factor drawn from 1 +/- this
    contrast_range: float = 0.30
    blur_radius: float = 2.0
    median_size: int = 3
    erase_fraction: float = 0.20    # erased square side / min(image side)
    overlay_chars: int = 10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0.0 <= self.crop_fraction < 0.5:
            raise ValueError("crop_fraction must be in [0, 0.5)")
        if not 1 <= self.jpeg_quality <= 95:
            raise ValueError("jpeg_quality must be in [1, 95]")
        if not 0.0 <= self.brightness_range < 1.0:
            raise ValueError("brightness_range must be in [0, 1)")
        if not 0.0 <= self.contrast_range < 1.0:
            raise ValueError("contrast_range must be in [0, 1)")
        if self.blur_radius < 0 or self.median_size % 2 != 1:
            raise ValueError("blur_radius >= 0 and odd median_size required")
        if not 0.0 <= self.erase_fraction < 1.0:
            raise ValueError("erase_fraction must be in [0, 1)")
        if self.overlay_chars < 0:
            raise ValueError("overlay_chars must be >= 0")


def _image_rng(spec: TransformSpec, name: str) -> random.Random:
    # Keyed per image so processing order and parallelism cannot change results.
    return random.Random(f"transform:{spec.seed}:{spec.variant}:{name}")


def crop_screenshot(image: Image.Image, fraction: float) -> Image.Image:
    """Central crop removing `fraction` of the width/height on each side."""
    w, h = image.size
    dx, dy = round(w * fraction), round(h * fraction)
    return image.crop((dx, dy, w - dx, h - dy))


def recompress_jpeg(image: Image.Image, quality: int) -> Image.Image:
    buf = io.BytesIO()
    image.convert("RGB").save(buf, format="JPEG", quality=quality, subsampling=2)
    buf.seek(0)
    out = Image.open(buf)
    out.load()
    return out


def _apply_variant(image: Image.Image, spec: TransformSpec,
                   rng: random.Random) -> tuple[Image.Image, dict]:
    if spec.variant == "brightness":
        factor = 1.0 + rng.uniform(-spec.brightness_range, spec.brightness_range)
        return ImageEnhance.Brightness(image).enhance(factor), {"factor": factor}
    if spec.variant == "contrast":
        factor = 1.0 + rng.uniform(-spec.contrast_range, spec.contrast_range)
        return ImageEnhance.Contrast(image).enhance(factor), {"factor": factor}
    if spec.variant == "blur":
        return (image.filter(ImageFilter.GaussianBlur(spec.blur_radius)),
                {"radius": spec.blur_radius})
    if spec.variant == "median":
        return (image.filter(ImageFilter.MedianFilter(spec.median_size)),
                {"size": spec.median_size})
    return image, {}


def _apply_post(image: Image.Image, spec: TransformSpec,
                rng: random.Random) -> tuple[Image.Image, dict]:
    img = image.convert("RGB")
    w, h = img.size
    params: dict = {}
    draw = ImageDraw.Draw(img)

    side = round(spec.erase_fraction * min(w, h))
    if side > 0 and side < min(w, h):
        x = rng.randrange(0, w - side + 1)
        y = rng.randrange(0, h - side + 1)
        draw.rectangle((x, y, x + side, y + side), fill=(0, 0, 0))
        params["erase"] = {"x": x, "y": y, "side": side}

    if spec.overlay_chars > 0:
        text = "".join(rng.choice(string.ascii_letters + string.digits)
                       for _ in range(spec.overlay_chars))
        size = max(10, h // 10)
        font = ImageFont.truetype(str(_FONT_PATH), size)
        tx = rng.randrange(0, max(1, w - size * spec.overlay_chars // 2))
        ty = rng.randrange(0, max(1, h - size))
        draw.text((tx, ty), text, font=font, fill=(255, 255, 255),
                  stroke_width=max(1, size // 12), stroke_fill=(0, 0, 0))
        params["overlay"] = {"text": text, "x": tx, "y": ty, "font_size": size}
    return img, params


def apply_transform(image: Image.Image, spec: TransformSpec,
                    name: str = "") -> tuple[Image.Image, dict]:
    """Run the full pipeline on one image; returns (image, drawn params)."""
    rng = _image_rng(spec, name)
    params = {"variant": spec.variant,
              "crop_fraction": spec.crop_fraction,
              "jpeg_quality": spec.jpeg_quality}
    img = crop_screenshot(image, spec.crop_fraction)
    img = recompress_jpeg(img, spec.jpeg_quality)
    img, vparams = _apply_variant(img, spec, rng)
    params.update(vparams)
    img, pparams = _apply_post(img, spec, rng)
    params.update(pparams)
    return img, params


_IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp", ".tiff"}


def list_images(images_dir) -> list[Path]:
    return sorted(p for p in Path(images_dir).iterdir()
                  if p.suffix.lower() in _IMAGE_SUFFIXES)


def transform_directory(images_dir, out_dir, spec: TransformSpec) -> dict:
    """Transform every image in a directory; writes images + manifest.json.

    The manifest maps each output filename to the parameters actually
    drawn for it, proving every value stayed inside the spec's ranges.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"spec": dataclasses.asdict(spec), "images": {}}
    for path in list_images(images_dir):
        with Image.open(path) as im:
            im.load()
            transformed, params = apply_transform(im, spec, name=path.name)
        out_name = path.stem + ".jpg"
        transformed.save(out / out_name, format="JPEG", quality=95, subsampling=2)
        manifest["images"][out_name] = params
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest
