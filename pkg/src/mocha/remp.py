"""Full-resolution refinement from photometric reconstruction error.

The plane homography ``H = K_l (R - T N^T / D) K_r^-1`` maps right-view
pixels onto left-view pixels; the warped right image is therefore sampled at
``H^-1 p`` for each left pixel ``p``.  For a rectified rig
(``R = I``, ``T = (-B, 0, 0)``, ``N = (0, 0, 1)``, ``D = f B / d``) this is
the familiar ``(u - d, v)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DTYPE, DimensionError, SeededGenerator, as_tensor3, he_uniform
from .layers import avg_pool, conv2d, relu, sigmoid, upsample
from .motif_graph import McgaConfig, mcga_apply


@dataclass(frozen=True)
class CameraRig:
    k_l: np.ndarray
    k_r: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    normal: np.ndarray
    focal: float
    baseline: float

    def __post_init__(self):
        for name in ("k_l", "k_r"):
            k = np.asarray(getattr(self, name), dtype=DTYPE)
            if k.shape != (3, 3) or np.any(np.tril(k, -1)) or np.any(np.diag(k) <= 0):
                raise ValueError(f"{name} must be upper-triangular with a positive diagonal")
        if not np.isclose(np.linalg.norm(self.normal), 1.0):
            raise ValueError("plane normal must be a unit vector")
        if self.baseline <= 0:
            raise ValueError("baseline must be positive")

    @classmethod
    def rectified(cls, focal: float, baseline: float, cx: float = 0.0, cy: float = 0.0) -> CameraRig:
        k = np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
        return cls(k, k.copy(), np.eye(3), np.array([-baseline, 0.0, 0.0]),
                   np.array([0.0, 0.0, 1.0]), focal, baseline)

    def depth(self, disparity):
        return self.focal * self.baseline / np.asarray(disparity, dtype=DTYPE)


def _homography_terms(rig: CameraRig):
    k_r_inv = np.linalg.inv(rig.k_r)
    base = rig.k_l @ rig.rotation @ k_r_inv
    plane = rig.k_l @ np.outer(rig.translation, rig.normal) @ k_r_inv
    return base, plane


def plane_homography(rig: CameraRig, depth: float) -> np.ndarray:
    if not depth > 0:
        raise ValueError(f"plane depth must be positive, got {depth}")
    try:
        base, plane = _homography_terms(rig)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("right intrinsic matrix is singular") from exc
    return base - plane / depth


@dataclass
class ReconError:
    error: np.ndarray
    valid: np.ndarray


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(C, H, W)`` at real coordinates; out-of-frame samples are 0 and flagged."""
    _, h, w = img.shape
    valid = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xs = np.where(valid, x, 0.0)
    ys = np.where(valid, y, 0.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx, fy = xs - x0, ys - y0
    top = img[:, y0, x0] * (1 - fx) + img[:, y0, x1] * fx
    bot = img[:, y1, x0] * (1 - fx) + img[:, y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(valid, out, 0.0), valid


def recon_error(i_l, i_r, disp, rig: CameraRig | None = None) -> ReconError:
    """Warped right image minus left image, masked where the warp leaves the frame.

    Without a rig the rectified shortcut samples ``I_r`` at ``(u - d, v)``;
    with one, every pixel uses the homography of its own plane depth.
    """
    i_l = as_tensor3(i_l, "left image")
    i_r = as_tensor3(i_r, "right image")
    disp = np.asarray(disp, dtype=DTYPE)
    if i_l.shape != i_r.shape or disp.shape != i_l.shape[1:]:
        raise DimensionError(
            f"images {i_l.shape}/{i_r.shape} and disparity {disp.shape} do not match"
        )
    _, h, w = i_l.shape
    v, u = np.indices((h, w), dtype=DTYPE)
    if rig is None:
        x, y = u - disp, v
    else:
        base, plane = _homography_terms(rig)
        # D = f B / d, so T N^T / D = T N^T * d / (f B); d = 0 is the plane at infinity
        inv_depth = disp / (rig.focal * rig.baseline)
        hom = base[None, None] - plane[None, None] * inv_depth[..., None, None]
        p = np.stack([u, v, np.ones_like(u)], axis=-1)[..., None]
        q = np.linalg.solve(hom, p)[..., 0]
        x, y = q[..., 0] / q[..., 2], q[..., 1] / q[..., 2]
    warped, valid = bilinear_sample(i_r, x, y)
    err = np.where(valid, warped - i_l, 0.0)
    return ReconError(err, valid)


# --- penalty network ---------------------------------------------------------


@dataclass
class RempWeights:
    """Seeded encoder-decoder, LFE branch, LMC gate, and the single-channel correction head."""

    unet: dict[str, tuple[np.ndarray, np.ndarray]]
    lfe: tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    head: tuple[np.ndarray, np.ndarray]
    width: int = 8
    mcga: McgaConfig = field(default_factory=lambda: McgaConfig(n_groups=2))

    @classmethod
    def seeded(cls, seed: int, in_channels: int = 4, width: int = 8,
               mcga: McgaConfig | None = None) -> RempWeights:
        root = SeededGenerator(seed).child("remp")

        def conv(tag, cin, cout, k=3):
            fan_in = cin * k * k
            return (he_uniform(root.child(tag + ".w"), (cout, cin, k, k), fan_in),
                    he_uniform(root.child(tag + ".b"), (cout,), fan_in) * 0.1)

        unet = {
            "in": conv("in", in_channels, width),
            "down1": conv("down1", width, 2 * width),
            "down2": conv("down2", 2 * width, 4 * width),
            "up2": conv("up2", 4 * width + 2 * width, 2 * width),
            "up1": conv("up1", 2 * width + width, width),
        }
        lfe = (conv("lfe1", width, width), conv("lfe2", width, width))
        head = conv("head", width, 1)
        cfg = mcga or McgaConfig(n_groups=2)
        return cls(unet, lfe, head, width, cfg)

    def with_zero_head(self) -> RempWeights:
        w, b = self.head
        return RempWeights(self.unet, self.lfe, (np.zeros_like(w), np.zeros_like(b)),
                           self.width, self.mcga)


def unet(x: np.ndarray, wts: RempWeights, threads: int = 1) -> np.ndarray:
    u = wts.unet
    e0 = relu(conv2d(x, *u["in"], threads=threads))
    e1 = relu(conv2d(e0, *u["down1"], stride=2, threads=threads))
    e2 = relu(conv2d(e1, *u["down2"], stride=2, threads=threads))
    d1 = relu(conv2d(np.concatenate([upsample(e2, 2), e1]), *u["up2"], threads=threads))
    return relu(conv2d(np.concatenate([upsample(d1, 2), e0]), *u["up1"], threads=threads))


def lfe_branch(o: np.ndarray, wts: RempWeights, threads: int = 1) -> np.ndarray:
    (w1, b1), (w2, b2) = wts.lfe
    low = sigmoid(conv2d(relu(conv2d(avg_pool(o, 2), w1, b1, threads=threads)), w2, b2,
                         threads=threads))
    return upsample(low, 2)


def lmc_branch(o: np.ndarray, wts: RempWeights, threads: int = 1) -> np.ndarray:
    return sigmoid(mcga_apply(o, wts.mcga, threads=threads))


def remp_refine(d_up, err: ReconError, wts: RempWeights, disp_scale: float = 1.0,
                threads: int = 1) -> np.ndarray:
    """``d_up - head(LFE * (1 - LMC) + o * LMC)`` with ``o`` the encoder-decoder output.

    The encoder-decoder sees ``d_up / disp_scale``; the penalty is in pixels.
    """
    d_up = np.asarray(d_up, dtype=DTYPE)
    e = np.asarray(err.error, dtype=DTYPE)
    if e.shape[1:] != d_up.shape:
        raise DimensionError(f"error {e.shape} and disparity {d_up.shape} do not match")
    o = unet(np.concatenate([d_up[None] / disp_scale, e]), wts, threads)
    lfe = lfe_branch(o, wts, threads)
    lmc = lmc_branch(o, wts, threads)
    hfe = o * lmc
    penalty = conv2d(lfe * (1 - lmc) + hfe, *wts.head, threads=threads)[0]
    return d_up - penalty


def upsample_disparity(d: np.ndarray, factor: int = 4) -> np.ndarray:
    """Bilinear upsampling with values scaled by ``factor``."""
    return upsample(np.asarray(d, dtype=DTYPE)[None], factor)[0] * factor
