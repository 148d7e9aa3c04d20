"""Heatmap rendering to binary PPM (P6) with a red-white-blue diverging map."""
import numpy as np


def heatmap_rgb(relevance, upscale=1):
    """Max-abs symmetric normalization: 0 -> white, +max -> (255, 0, 0),
    -max -> (0, 0, 255), linear in between. Channel axes are summed."""
    r = np.asarray(relevance, dtype=np.float64)
    if r.ndim >= 3:
        r = r.sum(axis=tuple(range(r.ndim - 2)))
    r = np.atleast_2d(r)
    scale = float(np.max(np.abs(r)))
    u = r / scale if scale > 0 else np.zeros(r.shape)
    pos = np.clip(u, 0.0, 1.0)
    neg = np.clip(-u, 0.0, 1.0)
    rgb = np.empty(r.shape + (3,))
    rgb[..., 0] = 1.0 - neg
    rgb[..., 1] = 1.0 - pos - neg
    rgb[..., 2] = 1.0 - pos
    img = np.rint(255.0 * rgb).astype(np.uint8)
    if upscale > 1:
        img = img.repeat(upscale, axis=0).repeat(upscale, axis=1)
    return img


def encode_ppm(img):
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_ppm(path, relevance, upscale=1):
    with open(path, "wb") as fh:
        fh.write(encode_ppm(heatmap_rgb(relevance, upscale)))


def read_ppm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    fields, pos = [], 0
    # magic, width, height, maxval, then exactly one whitespace byte
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6" or fields[3] != b"255":
        raise ValueError("not an 8-bit binary PPM")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos + 1).reshape(h, w, 3)
