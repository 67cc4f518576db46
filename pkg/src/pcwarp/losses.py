"""Reconstruction losses and image-quality metrics.

Two SSIM flavors are used deliberately:

* the evaluation metric (:func:`ssim`) with an 11x11 Gaussian window
  (sigma 1.5, C1=0.01^2, C2=0.03^2 for unit dynamic range), averaged over
  valid window centers only;
* a per-pixel 3x3 uniform-window variant (:func:`local_ssim`) with reflect
  padding, which keeps the photometric loss defined at every pixel.

Norms written ``||.||_1`` in the loss definitions are means over pixels (and
channels), so loss weights are independent of image size. Gradients of the
photometric and smoothness losses are closed-form; central finite differences
are the intended test oracle for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import DepthMap

__all__ = [
    "SsimParams",
    "LossBreakdown",
    "l1_metric",
    "ssim",
    "local_ssim",
    "photometric_loss",
    "photometric_loss_grad",
    "smoothness_loss",
    "smoothness_loss_grad",
    "mean_normalized_inverse_depth",
    "min_projection_mask",
    "depth_loss",
    "completion_losses",
]


@dataclass(frozen=True)
class SsimParams:
    """SSIM window configuration for dynamic range 1.0."""

    window: int = 11
    kind: str = "gaussian"
    sigma: float = 1.5
    c1: float = 0.01**2
    c2: float = 0.03**2

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InputError(f"SSIM window must be odd and >= 3, got {self.window}")
        if self.kind not in ("gaussian", "uniform"):
            raise InputError(f"SSIM window kind must be gaussian or uniform, got {self.kind!r}")
        if not (self.c1 > 0 and self.c2 > 0):
            raise InputError("SSIM stabilizers C1, C2 must be positive")

    def kernel1d(self) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(self.window, 1.0 / self.window)
        half = (self.window - 1) / 2.0
        x = np.arange(self.window) - half
        g = np.exp(-(x**2) / (2.0 * self.sigma**2))
        return g / g.sum()


@dataclass
class LossBreakdown:
    """Named scalar loss terms, their weights, and the weighted total."""

    terms: dict[str, float]
    weights: dict[str, float]
    total: float

    def __post_init__(self):
        if set(self.terms) != set(self.weights):
            raise InputError("loss terms and weights must use the same names")
        check = sum(self.weights[k] * self.terms[k] for k in self.terms)
        if abs(check - self.total) > 1e-12 * max(1.0, abs(self.total)):
            raise InputError("total does not equal the weighted sum of terms")

    @classmethod
    def from_terms(cls, terms: dict[str, float], weights: dict[str, float]) -> "LossBreakdown":
        total = sum(weights[k] * terms[k] for k in terms)
        return cls(terms=terms, weights=weights, total=total)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise InputError(f"{what} shapes differ: {a.shape} vs {b.shape}")


def _channels(img: np.ndarray) -> np.ndarray:
    """View any image as (H, W, C) float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[..., None]
    if img.ndim == 3:
        return img
    raise InputError(f"expected a 2-D or 3-D image, got shape {img.shape}")


def l1_metric(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all pixels and channels.

    For inputs in [0, 1] the result lies in [0, 1]; lower is better.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "image")
    return float(np.mean(np.abs(a - b)))


def _valid_corr(x: np.ndarray, k1d: np.ndarray) -> np.ndarray:
    """Separable 2-D correlation keeping only fully-covered window centers."""
    win = np.lib.stride_tricks.sliding_window_view(x, len(k1d), axis=1)
    x = win @ k1d
    win = np.lib.stride_tricks.sliding_window_view(x, len(k1d), axis=0)
    return win @ k1d


def _ssim_stats_map(x, y, mean_op, c1, c2):
    mx = mean_op(x)
    my = mean_op(y)
    vx = mean_op(x * x) - mx * mx
    vy = mean_op(y * y) - my * my
    cxy = mean_op(x * y) - mx * my
    a1 = 2.0 * mx * my + c1
    a2 = 2.0 * cxy + c2
    b1 = mx * mx + my * my + c1
    b2 = vx + vy + c2
    return (a1 * a2) / (b1 * b2)


def ssim(
    a: np.ndarray, b: np.ndarray, params: SsimParams | None = None
) -> tuple[float, np.ndarray]:
    """Structural similarity between two images.

    Computes the standard windowed SSIM per channel over all window positions
    that fit entirely inside the image, averages channels, and returns the
    scalar mean plus the per-window-center map (shape shrinks by window-1 in
    each dimension). Raises if the image is smaller than the window.
    """
    params = params or SsimParams()
    a = _channels(a)
    b = _channels(b)
    _check_same_shape(a, b, "image")
    h, w = a.shape[:2]
    if h < params.window or w < params.window:
        raise InputError(
            f"image {h}x{w} smaller than SSIM window {params.window}"
        )
    k1d = params.kernel1d()

    def mean_op(x):
        return _valid_corr(x, k1d)

    maps = [
        _ssim_stats_map(a[..., c], b[..., c], mean_op, params.c1, params.c2)
        for c in range(a.shape[2])
    ]
    smap = np.mean(maps, axis=0)
    return float(smap.mean()), smap


# ---------------------------------------------------------------------------
# Reflect-padded local means (per-pixel SSIM) and their exact adjoint, for
# closed-form gradients.
# ---------------------------------------------------------------------------


def _local_mean(x: np.ndarray, radius: int) -> np.ndarray:
    h, w = x.shape
    xp = np.pad(x, radius, mode="reflect")
    out = np.zeros_like(x)
    k = 2 * radius + 1
    for di in range(k):
        for dj in range(k):
            out += xp[di : di + h, dj : dj + w]
    return out / (k * k)


def _local_mean_adjoint(g: np.ndarray, radius: int) -> np.ndarray:
    h, w = g.shape
    k = 2 * radius + 1
    gp = np.zeros((h + 2 * radius, w + 2 * radius))
    for di in range(k):
        for dj in range(k):
            gp[di : di + h, dj : dj + w] += g
    gp /= k * k
    # fold padded cells back onto their reflect-pad sources
    idx = np.pad(np.arange(h * w).reshape(h, w), radius, mode="reflect")
    out = np.zeros(h * w)
    np.add.at(out, idx.ravel(), gp.ravel())
    return out.reshape(h, w)


def local_ssim(
    a: np.ndarray, b: np.ndarray, window: int = 3, c1: float = 0.01**2, c2: float = 0.03**2
) -> np.ndarray:
    """Same-size per-pixel SSIM map (uniform window, reflect padding).

    Averaged over channels for multi-channel inputs.
    """
    if window < 3 or window % 2 == 0:
        raise InputError(f"window must be odd and >= 3, got {window}")
    a = _channels(a)
    b = _channels(b)
    _check_same_shape(a, b, "image")
    radius = window // 2
    if min(a.shape[:2]) <= radius:
        raise InputError("image too small for reflect padding at this window")

    def mean_op(x):
        return _local_mean(x, radius)

    maps = [
        _ssim_stats_map(a[..., c], b[..., c], mean_op, c1, c2)
        for c in range(a.shape[2])
    ]
    return np.mean(maps, axis=0)


def photometric_loss(
    src: np.ndarray, recon: np.ndarray, alpha: float = 0.85, window: int = 3
) -> tuple[float, np.ndarray]:
    """Blend of per-pixel structural dissimilarity and absolute difference.

    Per pixel: ``alpha/2 * (1 - SSIM_local) + (1 - alpha) * |src - recon|``
    with channel-averaged terms; the scalar is the mean over pixels.
    """
    a = _channels(src)
    b = _channels(recon)
    _check_same_shape(a, b, "image")
    smap = local_ssim(a, b, window=window)
    l1map = np.mean(np.abs(a - b), axis=2)
    pmap = 0.5 * alpha * (1.0 - smap) + (1.0 - alpha) * l1map
    return float(pmap.mean()), pmap


def photometric_loss_grad(
    src: np.ndarray,
    recon: np.ndarray,
    alpha: float = 0.85,
    window: int = 3,
    c1: float = 0.01**2,
    c2: float = 0.03**2,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form gradient of the photometric loss scalar.

    Returns ``(d loss / d src, d loss / d recon)`` with the input shapes.
    The absolute-value term is non-differentiable where ``src == recon``;
    there the sign convention ``sign(0) = 0`` is used.
    """
    a = _channels(src)
    b = _channels(recon)
    _check_same_shape(a, b, "image")
    h, w, nc = a.shape
    radius = window // 2
    n = h * w
    g_a = np.zeros_like(a)
    g_b = np.zeros_like(b)
    # d(loss)/d(ssim map entry); the map is channel-averaged, hence /nc
    gs = np.full((h, w), -0.5 * alpha / (n * nc))

    for c in range(nc):
        x = a[..., c]
        y = b[..., c]
        mx = _local_mean(x, radius)
        my = _local_mean(y, radius)
        ex2 = _local_mean(x * x, radius)
        ey2 = _local_mean(y * y, radius)
        exy = _local_mean(x * y, radius)
        vx = ex2 - mx * mx
        vy = ey2 - my * my
        cxy = exy - mx * my
        a1 = 2.0 * mx * my + c1
        a2 = 2.0 * cxy + c2
        b1 = mx * mx + my * my + c1
        b2 = vx + vy + c2
        s = (a1 * a2) / (b1 * b2)

        ga1 = gs * a2 / (b1 * b2)
        ga2 = gs * a1 / (b1 * b2)
        gb1 = -gs * s / b1
        gb2 = -gs * s / b2

        gmx = 2.0 * my * ga1 + 2.0 * mx * gb1 - 2.0 * my * ga2 - 2.0 * mx * gb2
        gmy = 2.0 * mx * ga1 + 2.0 * my * gb1 - 2.0 * mx * ga2 - 2.0 * my * gb2
        gex2 = gb2
        gey2 = gb2
        gexy = 2.0 * ga2

        g_a[..., c] = (
            _local_mean_adjoint(gmx, radius)
            + 2.0 * x * _local_mean_adjoint(gex2, radius)
            + y * _local_mean_adjoint(gexy, radius)
        )
        g_b[..., c] = (
            _local_mean_adjoint(gmy, radius)
            + 2.0 * y * _local_mean_adjoint(gey2, radius)
            + x * _local_mean_adjoint(gexy, radius)
        )
        sgn = np.sign(x - y) * (1.0 - alpha) / (n * nc)
        g_a[..., c] += sgn
        g_b[..., c] -= sgn

    if np.asarray(src).ndim == 2:
        return g_a[..., 0], g_b[..., 0]
    return g_a, g_b


def _image_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference channel-mean absolute gradients of an image."""
    c = _channels(img)
    gx = np.mean(np.abs(c[:, 1:] - c[:, :-1]), axis=2)
    gy = np.mean(np.abs(c[1:, :] - c[:-1, :]), axis=2)
    return gx, gy


def smoothness_loss(d: np.ndarray, image: np.ndarray) -> float:
    """Edge-aware first-order smoothness of a (disparity-like) map.

    ``mean(|dx d| * exp(-|dx I|)) + mean(|dy d| * exp(-|dy I|))`` with
    forward differences; image gradients are channel-averaged.
    """
    d = np.asarray(d, dtype=np.float64)
    img = _channels(image)
    if d.shape != img.shape[:2]:
        raise InputError(f"map shape {d.shape} does not match image {img.shape[:2]}")
    gx, gy = _image_gradients(image)
    dx = np.abs(d[:, 1:] - d[:, :-1])
    dy = np.abs(d[1:, :] - d[:-1, :])
    tx = float(np.mean(dx * np.exp(-gx))) if dx.size else 0.0
    ty = float(np.mean(dy * np.exp(-gy))) if dy.size else 0.0
    return tx + ty


def smoothness_loss_grad(
    d: np.ndarray, image: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form gradient of :func:`smoothness_loss`.

    Returns ``(d loss / d map, d loss / d image)``; the image gradient covers
    the edge-aware weights. Non-differentiable points (exact zero
    differences) use ``sign(0) = 0``.
    """
    d = np.asarray(d, dtype=np.float64)
    img = _channels(image)
    if d.shape != img.shape[:2]:
        raise InputError(f"map shape {d.shape} does not match image {img.shape[:2]}")
    nc = img.shape[2]
    g_d = np.zeros_like(d)
    g_img = np.zeros_like(img)

    for axis in (1, 0):
        if axis == 1:
            dd = d[:, 1:] - d[:, :-1]
            di = img[:, 1:] - img[:, :-1]
        else:
            dd = d[1:, :] - d[:-1, :]
            di = img[1:, :] - img[:-1, :]
        if dd.size == 0:
            continue
        gi = np.mean(np.abs(di), axis=2)
        wgt = np.exp(-gi)
        inv_n = 1.0 / dd.size

        g_dd = np.sign(dd) * wgt * inv_n
        # dL/d(image diff) through the weight: |dd| * d/dgi exp(-gi) / n
        g_gi = -np.abs(dd) * wgt * inv_n
        g_di = g_gi[..., None] * np.sign(di) / nc

        if axis == 1:
            g_d[:, 1:] += g_dd
            g_d[:, :-1] -= g_dd
            g_img[:, 1:] += g_di
            g_img[:, :-1] -= g_di
        else:
            g_d[1:, :] += g_dd
            g_d[:-1, :] -= g_dd
            g_img[1:, :] += g_di
            g_img[:-1, :] -= g_di

    if np.asarray(image).ndim == 2:
        return g_d, g_img[..., 0]
    return g_d, g_img


def mean_normalized_inverse_depth(depth: DepthMap) -> np.ndarray:
    """``mean(D_valid) / D`` per valid pixel, 0 at invalid pixels."""
    mask = depth.valid_mask
    if not mask.any():
        raise InputError("depth map has no valid pixels")
    dbar = float(depth.values[mask].mean())
    out = np.zeros_like(depth.values)
    out[mask] = dbar / depth.values[mask]
    return out


def min_projection_mask(
    src: np.ndarray, recon: np.ndarray, target: np.ndarray, alpha: float = 0.85
) -> np.ndarray:
    """Per-pixel indicator: reconstruction photometric error strictly below
    the raw source-to-target error. Equality yields False."""
    _, map_recon = photometric_loss(src, recon, alpha)
    _, map_target = photometric_loss(src, target, alpha)
    return map_recon < map_target


def depth_loss(
    src: np.ndarray,
    recon: np.ndarray,
    target: np.ndarray,
    d: np.ndarray,
    alpha: float = 0.85,
    w_d: float = 1e-3,
) -> LossBreakdown:
    """Masked photometric loss plus weighted smoothness.

    The photometric map of (src, recon) is kept only where it is strictly
    below that of (src, target) (per-pixel minimum projection); the masked
    mean is combined with ``w_d`` times the smoothness of ``d`` (the
    mean-normalized inverse depth) against ``src``.
    """
    a = np.asarray(src)
    if a.shape != np.asarray(recon).shape or a.shape != np.asarray(target).shape:
        raise InputError("src, recon and target must share one shape")
    _, map_recon = photometric_loss(src, recon, alpha)
    mu = min_projection_mask(src, recon, target, alpha)
    photo = float(np.mean(np.where(mu, map_recon, 0.0)))
    smooth = smoothness_loss(d, src)
    return LossBreakdown.from_terms(
        terms={"photometric": photo, "smoothness": smooth},
        weights={"photometric": 1.0, "smoothness": w_d},
    )


def completion_losses(
    d_real: float,
    d_fake: float,
    target: np.ndarray,
    generated: np.ndarray,
    feature_pairs=(),
    weights: tuple[float, float, float] = (1.0, 100.0, 100.0),
    ssim_params: SsimParams | None = None,
) -> LossBreakdown:
    """Adversarial-completion loss bundle over caller-supplied ingredients.

    * discriminator: ``(d_real - 1)^2 + d_fake^2`` (least-squares GAN);
    * generator: ``(1 - SSIM(target, generated)) + mean|target - generated|``;
    * perceptual: sum of Euclidean distances over the given feature-map
      pairs (e.g. discriminator and VGG activations, extracted by the
      caller).

    The total is the weighted sum with ``weights`` applied in that order.
    """
    l_d = (float(d_real) - 1.0) ** 2 + float(d_fake) ** 2
    ssim_val, _ = ssim(target, generated, ssim_params)
    l_g = (1.0 - ssim_val) + l1_metric(target, generated)
    l_p = 0.0
    for fa, fb in feature_pairs:
        fa = np.asarray(fa, dtype=np.float64)
        fb = np.asarray(fb, dtype=np.float64)
        _check_same_shape(fa, fb, "feature map")
        l_p += float(np.sqrt(np.sum((fa - fb) ** 2)))
    w1, w2, w3 = weights
    return LossBreakdown.from_terms(
        terms={"discriminator": l_d, "generator": l_g, "perceptual": l_p},
        weights={"discriminator": w1, "generator": w2, "perceptual": w3},
    )
