"""NumPy implementation of the same-size 2D correlation kernel.

Used when the compiled extension is unavailable or explicitly
deselected. Accumulates kernel taps in row-major (u, v) order, the same
order the compiled loop uses, so both backends produce identical
floating-point results.
"""

import numpy as np


def corr2d(img: np.ndarray, kernel: np.ndarray, zero_pad: bool) -> np.ndarray:
    h, w = img.shape
    kh, kw = kernel.shape
    mode = "constant" if zero_pad else "reflect"
    padded = np.pad(img, ((kh // 2, kh // 2), (kw // 2, kw // 2)), mode=mode)
    out = np.zeros((h, w), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            k = kernel[u, v]
            if k == 0.0:
                continue
            out += k * padded[u : u + h, v : v + w]
    return out
