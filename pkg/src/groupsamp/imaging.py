"""Image front end: pixel features, similarity graph, superpixels, labels.

A pixel is described by its 3x3 RGB patch plus the absolute coordinates of
the patch pixels (45 values); the similarity graph connects each pixel to
its 9 nearest neighbours in feature space with Gaussian weights whose scale
is the 25th percentile of the observed neighbour distances. Superpixels come
from a simplified SLIC (grid-seeded localised k-means in lab-xy space with
orphan absorption) or from an externally supplied label map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.sparse as sp
from PIL import Image
from scipy.spatial import cKDTree

from .graphs import SparseGraph
from .groups import GroupPartition, SampleDraw

SNR_CAP_DB = 300.0


def load_image(path) -> np.ndarray:
    """Read an RGB image (PNG or PGM/PPM) as float64 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def load_mask(path) -> np.ndarray:
    """Read a binary ground-truth image as a {0, 1} float map."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    return (arr > 0.5).astype(float)


def save_image(arr: np.ndarray, path):
    data = np.clip(np.asarray(arr) * 255.0, 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)


def save_mask_png(mask: np.ndarray, path):
    Image.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255).save(path)


def mask_png_bytes(mask: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255).save(buf, format="PNG")
    return buf.getvalue()


@dataclass(frozen=True)
class SuperpixelMap:
    """Per-pixel superpixel ids, 0-based and contiguous."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 2:
            raise ValueError("label map must be 2-D")
        present = np.unique(labels)
        if present[0] != 0 or present[-1] != present.size - 1:
            raise ValueError("superpixel labels must be contiguous from 0")
        object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return int(self.labels.max() + 1)

    @property
    def shape(self):
        return self.labels.shape

    def to_partition(self) -> GroupPartition:
        """Row-major pixel partition with one group per superpixel."""
        return GroupPartition.from_labels(self.labels.ravel())

    def save_png(self, path):
        """16-bit label PNG, ids stored 1-based."""
        if self.N >= 2**16:
            raise ValueError("too many superpixels for a 16-bit label map")
        Image.fromarray((self.labels + 1).astype(np.uint16)).save(path)

    @classmethod
    def load_png(cls, path) -> "SuperpixelMap":
        with Image.open(path) as im:
            raw = np.asarray(im, dtype=np.int64)
        labels = raw - raw.min()
        _, contiguous = np.unique(labels, return_inverse=True)
        return cls(labels=contiguous.reshape(raw.shape))

    def boundary_pixels(self, group: int) -> np.ndarray:
        """(row, col) pixels of the group that touch a different group or the
        image border, in scan order."""
        mask = self.labels == group
        interior = scipy.ndimage.binary_erosion(mask, border_value=0)
        return np.argwhere(mask & ~interior)


def extract_features(img: np.ndarray) -> np.ndarray:
    """Per-pixel feature vectors of dimension 45.

    The 3x3 RGB patch around each pixel (edge-replicated), row-major, three
    channels per position, followed by the clamped absolute (row, col)
    coordinates of the nine patch pixels.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an RGB image of shape (H, W, 3)")
    h, w = img.shape[:2]
    padded = np.pad(img, ((1, 1), (1, 1), (0, 0)), mode="edge")
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    feats = np.empty((h * w, 45))
    col = 0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            patch = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
            feats[:, col : col + 3] = patch.reshape(-1, 3)
            col += 3
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            feats[:, col] = np.clip(rr + dr, 0, h - 1).ravel()
            feats[:, col + 1] = np.clip(cc + dc, 0, w - 1).ravel()
            col += 2
    return feats


def knn_graph(features: np.ndarray, k_nn: int = 9, sigma_percentile: float = 25.0) -> SparseGraph:
    """Gaussian-weighted k-nearest-neighbour graph over feature vectors.

    Exact neighbours via a kd-tree; the kernel scale is the given percentile
    of the directed-edge distances; the directed weights are symmetrised by
    averaging. All-identical features degenerate to a tiny positive scale.
    """
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    if n < k_nn + 1:
        raise ValueError(f"need at least {k_nn + 1} points for {k_nn} neighbours")
    tree = cKDTree(features)
    dists, idx = tree.query(features, k=k_nn + 1)
    self_mask = idx == np.arange(n)[:, None]
    missing_self = ~self_mask.any(axis=1)
    # duplicate points can push the query point itself out of the result;
    # drop the farthest neighbour instead so every row keeps k_nn entries
    self_mask[missing_self, -1] = True
    keep = ~self_mask
    neigh = idx[keep].reshape(n, k_nn)
    ndist = dists[keep].reshape(n, k_nn)
    sigma = float(np.percentile(ndist, sigma_percentile))
    sigma = max(sigma, 1e-9)
    weights = np.exp(-(ndist**2) / sigma**2)
    rows = np.repeat(np.arange(n), k_nn)
    directed = sp.csr_array((weights.ravel(), (rows, neigh.ravel())), shape=(n, n))
    return SparseGraph((directed + directed.T) * 0.5)


def _slic_centers(lab: np.ndarray, grid_r: int, grid_c: int) -> np.ndarray:
    h, w = lab.shape[:2]
    rs = (np.arange(grid_r) + 0.5) * h / grid_r
    cs = (np.arange(grid_c) + 0.5) * w / grid_c
    centers = np.empty((grid_r * grid_c, 5))
    i = 0
    for r in rs:
        for c in cs:
            ri, ci = int(r), int(c)
            centers[i, :3] = lab[ri, ci]
            centers[i, 3:] = (r, c)
            i += 1
    return centers


def slic_superpixels(
    img: np.ndarray, n_target: int, compactness: float = 10.0, iters: int = 10
) -> SuperpixelMap:
    """Simplified SLIC: localised k-means in lab-xy space.

    Seeds on a regular grid, assignment restricted to a 2S-by-2S window per
    cluster, then orphan connected components are absorbed into the largest
    adjacent superpixel. The resulting count can differ slightly from the
    target.
    """
    from skimage.color import rgb2lab

    img = np.asarray(img, dtype=float)
    h, w = img.shape[:2]
    n = h * w
    if not 1 <= n_target <= n:
        raise ValueError(f"superpixel target {n_target} outside [1, {n}]")
    lab = rgb2lab(img)
    step = np.sqrt(n / n_target)
    grid_r = max(1, round(h / step))
    grid_c = max(1, round(w / step))
    centers = _slic_centers(lab, grid_r, grid_c)
    ratio_sq = (compactness / step) ** 2
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    labels = np.zeros((h, w), dtype=int)
    for _ in range(iters):
        best = np.full((h, w), np.inf)
        for ci, center in enumerate(centers):
            r, c = center[3], center[4]
            r0, r1 = max(0, int(r - step)), min(h, int(r + step) + 1)
            c0, c1 = max(0, int(c - step)), min(w, int(c + step) + 1)
            d_color = ((lab[r0:r1, c0:c1] - center[:3]) ** 2).sum(axis=2)
            d_xy = (rr[r0:r1, c0:c1] - r) ** 2 + (cc[r0:r1, c0:c1] - c) ** 2
            dist = d_color + ratio_sq * d_xy
            window = best[r0:r1, c0:c1]
            better = dist < window
            window[better] = dist[better]
            labels[r0:r1, c0:c1][better] = ci
        unreached = ~np.isfinite(best)
        if unreached.any():
            pts = np.argwhere(unreached)
            nearest = np.argmin(
                ((pts[:, None, :] - centers[None, :, 3:]) ** 2).sum(axis=2), axis=1
            )
            labels[unreached] = nearest
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=centers.shape[0]).astype(float)
        nonempty = counts > 0
        for dim, values in enumerate(
            (lab[..., 0], lab[..., 1], lab[..., 2], rr.astype(float), cc.astype(float))
        ):
            sums = np.bincount(flat, weights=values.ravel(), minlength=centers.shape[0])
            centers[nonempty, dim] = sums[nonempty] / counts[nonempty]
    labels = _absorb_orphans(labels)
    _, contiguous = np.unique(labels, return_inverse=True)
    return SuperpixelMap(labels=contiguous.reshape(h, w))


def _absorb_orphans(labels: np.ndarray) -> np.ndarray:
    """Reassign every non-largest connected component of each superpixel to
    the largest neighbouring superpixel."""
    labels = labels.copy()
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    sizes = np.bincount(labels.ravel(), minlength=labels.max() + 1)
    for g in np.unique(labels):
        mask = labels == g
        comp, n_comp = scipy.ndimage.label(mask, structure=structure)
        if n_comp <= 1:
            continue
        comp_sizes = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(comp_sizes)) + 1
        for c in range(1, n_comp + 1):
            if c == keep:
                continue
            piece = comp == c
            ring = scipy.ndimage.binary_dilation(piece, structure=structure) & ~piece
            neighbours = np.unique(labels[ring])
            neighbours = neighbours[neighbours != g]
            if neighbours.size == 0:
                continue
            target = int(neighbours[np.argmax(sizes[neighbours])])
            labels[piece] = target
            sizes[target] += int(piece.sum())
            sizes[g] -= int(piece.sum())
    return labels


def emulate_labels(gt: np.ndarray, part: GroupPartition, draw: SampleDraw):
    """Emulated user labels for the drawn groups.

    Each drawn group gets label 1 when the ground-truth mean over the group
    exceeds one half (strictly), else 0; the measurement entry is the label
    scaled by the square root of the group size, consistent with selecting
    entries of the group-averaged ideal piecewise-constant signal. Returns
    ``(y_tilde, labels)``.
    """
    gt = np.asarray(gt, dtype=float).ravel()
    if gt.size != part.n:
        raise ValueError(f"ground truth has {gt.size} values for n={part.n}")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValueError("ground truth must be binary")
    omega = np.asarray(draw.omega, dtype=int)
    means = np.array([gt[part.groups[g]].mean() for g in omega])
    labels = (means > 0.5).astype(float)
    y_tilde = labels * np.sqrt(part.sizes[omega])
    return y_tilde, labels


def snr(x: np.ndarray, xstar: np.ndarray) -> float:
    """Reconstruction signal-to-noise ratio in dB, capped for exact recovery."""
    x = np.asarray(x, dtype=float).ravel()
    xstar = np.asarray(xstar, dtype=float).ravel()
    ref = np.linalg.norm(x)
    if ref == 0:
        raise ValueError("snr is undefined for a zero reference signal")
    err = np.linalg.norm(x - xstar)
    if err == 0:
        return SNR_CAP_DB
    return float(min(20.0 * np.log10(ref / err), SNR_CAP_DB))
