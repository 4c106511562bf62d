# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

"""Image-computable features of a stimulus.

Images are handled as 2-D uint8 numpy arrays (height, width) once converted to grayscale. All
feature functions are pure: the same pixels always give the same numbers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
import pandas as pd
from scipy import ndimage
from skimage.feature import graycomatrix

logger = logging.getLogger(__name__)

TAMURA_MIN_SIDE = 32
TAMURA_SCALES = 5
DIRECTION_BINS = 16
DIRECTION_THRESHOLD = 12.0
ORIENTATION_BIN_DEG = 2.0
GLCM_ANGLES = (0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4)

CV_FEATURE_NAMES = (
    "value",
    "keypoints",
    "tamura.coarseness",
    "tamura.contrast",
    "tamura.directionality",
    "glcm.contrast",
    "glcm.correlation",
    "glcm.energy",
    "glcm.homogeneity",
    "angles",
)


class VisionError(Exception):
    """Base class for image feature failures."""


class ImageLoadError(VisionError):
    """Raised if an image file is missing or cannot be decoded."""

    def __init__(self, *args, stimulus_id: Optional[str] = None, **kwargs):
        super().__init__(*args, **kwargs)
        self.stimulus_id = stimulus_id


class EmptyImageError(VisionError):
    """Raised if an image has no pixels."""


class ImageTooSmallError(VisionError):
    """Raised if an image is below the minimum side length for a feature."""


class CenterOutsideImageError(VisionError):
    """Raised if a mask centre lies outside the image."""


class InvalidRadiusError(VisionError):
    """Raised if a mask radius is not positive."""


class DegenerateImageError(VisionError):
    """Raised if a co-occurrence marginal has zero variance, leaving correlation undefined."""


class InvalidParameterError(VisionError):
    """Raised if a feature parameter is outside its valid range."""


@dataclass(frozen=True)
class VisionConfig:
    """Thresholds and sizes for the image features."""

    glcm_levels: int = 64
    glcm_distance: int = 1
    canny_sigma: float = 1.4
    canny_low: int = 50
    canny_high: int = 150
    hough_threshold: int = 30
    hough_min_length_ratio: float = 0.1
    hough_max_gap: int = 4
    keypoint_contrast: float = 0.03
    keypoint_edge_ratio: float = 10.0
    keypoint_sigma: float = 1.6
    keypoint_intervals: int = 3
    mask_radius_ratio: Optional[float] = None
    mask_fill: int = 0


def _check_gray(image: np.ndarray, min_side: int = 1) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise EmptyImageError(f"Expected a non-empty 2-D image, got shape {image.shape}")
    if min(image.shape) < min_side:
        raise ImageTooSmallError(f"Image side {min(image.shape)} is below {min_side}")
    return image


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Converts an (h, w, 3) RGB image to gray by round(0.299 R + 0.587 G + 0.114 B)."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.size == 0:
        raise EmptyImageError(f"Expected an (h, w, 3) image, got shape {rgb.shape}")
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)


def load_image(path: Union[str, Path], stimulus_id: Optional[str] = None) -> np.ndarray:
    """Reads an image file as grayscale. Colour images go through to_grayscale."""
    image = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if image is None:
        raise ImageLoadError(
            f"Cannot read image '{path}' of stimulus '{stimulus_id}'", stimulus_id=stimulus_id
        )
    return to_grayscale(image[..., ::-1])


def apply_circular_mask(
    image: np.ndarray, center: Tuple[float, float], radius: float, fill: int = 0
) -> np.ndarray:
    """Sets every pixel farther than radius from center (x, y) to fill."""
    image = _check_gray(image)
    height, width = image.shape
    cx, cy = center
    if not (0 <= cx < width and 0 <= cy < height):
        raise CenterOutsideImageError(f"Centre {center} lies outside a {width}x{height} image")
    if radius <= 0:
        raise InvalidRadiusError(f"Mask radius must be positive, got {radius}")
    yy, xx = np.mgrid[:height, :width]
    outside = (xx - cx) ** 2 + (yy - cy) ** 2 > radius**2
    masked = image.copy()
    masked[outside] = fill
    return masked


def mean_brightness(image: np.ndarray) -> float:
    """Mean of the HSV value channel, which for a gray image is the gray level, in [0, 1]."""
    image = _check_gray(image)
    return float(image.astype(np.float64).sum() / 255.0 / image.size)


@dataclass(frozen=True)
class Keypoint:
    """A difference-of-Gaussians keypoint in pixel coordinates."""

    x: float
    y: float
    size: float
    response: float


def detect_keypoints(
    image: np.ndarray,
    contrast_threshold: float = 0.03,
    edge_ratio: float = 10.0,
    sigma: float = 1.6,
    intervals: int = 3,
) -> List[Keypoint]:
    """Finds difference-of-Gaussians scale-space extrema with OpenCV's SIFT detector.

    Low-contrast extrema and edge-like extrema (principal curvature ratio above edge_ratio)
    are discarded.
    """
    image = _check_gray(image).astype(np.uint8)
    detector = cv2.SIFT_create(
        nOctaveLayers=intervals,
        contrastThreshold=contrast_threshold * intervals,
        edgeThreshold=edge_ratio,
        sigma=sigma,
    )
    found = detector.detect(image, None)
    keypoints = [Keypoint(kp.pt[0], kp.pt[1], kp.size, kp.response) for kp in found]
    return sorted(keypoints, key=lambda kp: (kp.y, kp.x, kp.size))


def keypoint_count(image: np.ndarray, **kwargs) -> int:
    """Counts distinct keypoint locations and scales."""
    # SIFT may report one location twice with different orientations
    keypoints = detect_keypoints(image, **kwargs)
    return len({(round(kp.x, 3), round(kp.y, 3), round(kp.size, 3)) for kp in keypoints})


@dataclass(frozen=True)
class TamuraFeatures:
    """Tamura coarseness, contrast and directionality of one image."""

    coarseness: float
    contrast: float
    directionality: float


def tamura_coarseness(image: np.ndarray) -> float:
    """Mean over pixels of the window size 2^k with the largest local average difference."""
    image = _check_gray(image, TAMURA_MIN_SIDE).astype(np.float64)
    rows, cols = image.shape
    best_size = np.full(image.shape, 2.0)
    best_diff = None
    for k in range(1, TAMURA_SCALES + 1):
        size = 2**k
        half = size // 2
        average = ndimage.uniform_filter(image, size=size, mode="mirror")
        diff_h = np.zeros_like(image)
        diff_v = np.zeros_like(image)
        if size < cols:
            diff_h[:, half : cols - half] = np.abs(average[:, size:] - average[:, : cols - size])
        if size < rows:
            diff_v[half : rows - half, :] = np.abs(average[size:, :] - average[: rows - size, :])
        diff = np.maximum(diff_h, diff_v)
        if best_diff is None:
            best_diff = diff
            continue
        # ties go to the smaller window
        better = diff > best_diff + 1e-9
        best_diff = np.where(better, diff, best_diff)
        best_size[better] = float(size)
    return float(best_size.mean())


def tamura_contrast(image: np.ndarray) -> float:
    """sigma / kurtosis^(1/4), zero for a constant image."""
    image = _check_gray(image).astype(np.float64)
    sigma = image.std()
    if sigma == 0:
        return 0.0
    kurtosis = np.mean((image - image.mean()) ** 4) / sigma**4
    return float(sigma / kurtosis**0.25)


def _histogram_peaks(histogram: np.ndarray) -> List[Tuple[int, List[int]]]:
    """Local maxima of a circular histogram, each with the bins up to the adjacent valleys."""
    n = len(histogram)
    peaks = []
    for i in range(n):
        left, right = histogram[(i - 1) % n], histogram[(i + 1) % n]
        if histogram[i] > 0 and histogram[i] > left and histogram[i] >= right:
            peaks.append(i)
    if not peaks and histogram.max() > 0:
        peaks = [int(np.argmax(histogram))]

    windows = []
    for peak in peaks:
        window = [peak]
        j = peak
        while len(window) < n:
            nxt = (j - 1) % n
            if histogram[nxt] > histogram[j] or nxt in window:
                break
            window.append(nxt)
            j = nxt
        j = peak
        while len(window) < n:
            nxt = (j + 1) % n
            if histogram[nxt] > histogram[j] or nxt in window:
                break
            window.append(nxt)
            j = nxt
        windows.append((peak, window))
    return windows


def tamura_directionality(image: np.ndarray) -> float:
    """Sharpness of the peaks of the gradient-direction histogram, in [0, 1].

    Uses Prewitt gradients, keeps pixels with |dG| = (|dH| + |dV|) / 2 at or above 12 and bins
    their direction into 16 bins over [0, pi). Directionality is one minus the number of peaks
    times the second moment of the histogram around each peak.
    """
    image = _check_gray(image).astype(np.float64)
    delta_h = ndimage.prewitt(image, axis=1)
    delta_v = ndimage.prewitt(image, axis=0)
    magnitude = (np.abs(delta_h) + np.abs(delta_v)) / 2.0
    strong = magnitude >= DIRECTION_THRESHOLD
    if not np.any(strong):
        return 0.0

    theta = np.mod(np.arctan2(delta_v[strong], delta_h[strong]), np.pi)
    theta[theta >= np.pi] = 0.0
    counts, _ = np.histogram(theta, bins=DIRECTION_BINS, range=(0.0, np.pi))
    histogram = counts / counts.sum()
    centres = (np.arange(DIRECTION_BINS) + 0.5) * np.pi / DIRECTION_BINS

    peaks = _histogram_peaks(histogram)
    spread = 0.0
    for peak, window in peaks:
        offsets = centres[window] - centres[peak]
        # distance on the circle of directions
        offsets = (offsets + np.pi / 2) % np.pi - np.pi / 2
        spread += float(np.sum(offsets**2 * histogram[window]))
    return float(np.clip(1.0 - len(peaks) * spread, 0.0, 1.0))


def tamura_features(image: np.ndarray) -> TamuraFeatures:
    """Computes all three Tamura features."""
    image = _check_gray(image, TAMURA_MIN_SIDE)
    return TamuraFeatures(
        coarseness=tamura_coarseness(image),
        contrast=tamura_contrast(image),
        directionality=tamura_directionality(image),
    )


@dataclass(frozen=True)
class GlcmFeatures:
    """Haralick statistics averaged over four directions.

    correlation_value is None when a co-occurrence marginal is constant; reading
    `correlation` then raises DegenerateImageError.
    """

    contrast: float
    energy: float
    homogeneity: float
    correlation_value: Optional[float]

    @property
    def correlation(self) -> float:
        if self.correlation_value is None:
            raise DegenerateImageError("GLCM correlation is undefined for this image")
        return self.correlation_value


def quantize(image: np.ndarray, levels: int) -> np.ndarray:
    """Maps 0..255 onto 0..levels-1 by floor(v * levels / 256)."""
    image = _check_gray(image).astype(np.int64)
    return (image * levels // 256).astype(np.uint8)


def glcm_matrices(image: np.ndarray, levels: int = 64, distance: int = 1) -> np.ndarray:
    """Symmetric normalised co-occurrence matrices, shape (levels, levels, 4)."""
    if not 2 <= levels <= 256:
        raise InvalidParameterError(f"GLCM levels must be in 2..256, got {levels}")
    if distance < 1:
        raise InvalidParameterError(f"GLCM distance must be at least 1, got {distance}")
    quantized = quantize(image, levels)
    matrices = graycomatrix(
        quantized,
        distances=[distance],
        angles=list(GLCM_ANGLES),
        levels=levels,
        symmetric=True,
        normed=True,
    )
    return matrices[:, :, 0, :]


def glcm_features(image: np.ndarray, levels: int = 64, distance: int = 1) -> GlcmFeatures:
    """GLCM statistics averaged over the four standard angles."""
    matrices = glcm_matrices(image, levels, distance)
    i, j = np.meshgrid(np.arange(levels), np.arange(levels), indexing="ij")
    contrast, energy, homogeneity, correlation = [], [], [], []
    degenerate = False
    for a in range(matrices.shape[2]):
        p = matrices[:, :, a]
        contrast.append(np.sum(p * (i - j) ** 2))
        energy.append(np.sum(p**2))
        homogeneity.append(np.sum(p / (1.0 + (i - j) ** 2)))
        mu_i, mu_j = np.sum(i * p), np.sum(j * p)
        sigma_i = math.sqrt(np.sum(p * (i - mu_i) ** 2))
        sigma_j = math.sqrt(np.sum(p * (j - mu_j) ** 2))
        if sigma_i * sigma_j == 0:
            degenerate = True
            continue
        correlation.append(np.sum(p * (i - mu_i) * (j - mu_j)) / (sigma_i * sigma_j))
    return GlcmFeatures(
        contrast=float(np.mean(contrast)),
        energy=float(np.mean(energy)),
        homogeneity=float(np.mean(homogeneity)),
        correlation_value=None if degenerate else float(np.clip(np.mean(correlation), -1, 1)),
    )


def normalize_angle(theta: float) -> float:
    """Folds a direction in degrees into [0, 180)."""
    folded = math.fmod(theta, 180.0)
    if folded < 0:
        folded += 180.0
    return 0.0 if folded >= 180.0 else folded


@dataclass(frozen=True)
class LineSegment:
    """A detected line segment with its orientation in [0, 180) degrees."""

    x1: float
    y1: float
    x2: float
    y2: float
    theta: float

    @classmethod
    def from_endpoints(cls, x1: float, y1: float, x2: float, y2: float) -> "LineSegment":
        theta = normalize_angle(math.degrees(math.atan2(y2 - y1, x2 - x1)))
        return cls(float(x1), float(y1), float(x2), float(y2), theta)

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


def detect_line_segments(
    image: np.ndarray, config: VisionConfig = VisionConfig()
) -> List[LineSegment]:
    """Canny edges followed by the probabilistic Hough transform.

    The minimum segment length is hough_min_length_ratio of the shorter image side.
    """
    image = _check_gray(image).astype(np.uint8)
    blurred = cv2.GaussianBlur(image, (0, 0), sigmaX=config.canny_sigma)
    edges = cv2.Canny(blurred, config.canny_low, config.canny_high)
    min_length = max(1, int(round(config.hough_min_length_ratio * min(image.shape))))
    lines = cv2.HoughLinesP(
        edges,
        rho=1,
        theta=np.pi / 180,
        threshold=config.hough_threshold,
        minLineLength=min_length,
        maxLineGap=config.hough_max_gap,
    )
    if lines is None:
        return []
    segments = [
        LineSegment.from_endpoints(*line[0])
        for line in lines
        if (line[0][0], line[0][1]) != (line[0][2], line[0][3])
    ]
    return sorted(segments, key=lambda s: (s.theta, s.x1, s.y1, s.x2, s.y2))


def orientation_histogram(
    segments: Sequence[LineSegment], bin_width: float = ORIENTATION_BIN_DEG
) -> np.ndarray:
    """Counts segments per orientation bin."""
    n_bins = int(round(180.0 / bin_width))
    bins = [min(int(s.theta // bin_width), n_bins - 1) for s in segments]
    return np.bincount(np.asarray(bins, dtype=int), minlength=n_bins)


def dominant_orientation_count(
    segments: Sequence[LineSegment], bin_width: float = ORIENTATION_BIN_DEG, min_count: int = 2
) -> int:
    """Number of orientation bins holding at least min_count segments."""
    if not segments:
        return 0
    return int(np.count_nonzero(orientation_histogram(segments, bin_width) >= min_count))


def extract_cv_features(
    image: np.ndarray, config: VisionConfig = VisionConfig()
) -> Dict[str, float]:
    """Computes the full image feature vector of one stimulus.

    A missing GLCM correlation is reported as NaN.
    """
    image = _check_gray(image, TAMURA_MIN_SIDE)
    if config.mask_radius_ratio is not None:
        height, width = image.shape
        image = apply_circular_mask(
            image,
            ((width - 1) / 2.0, (height - 1) / 2.0),
            config.mask_radius_ratio * min(height, width) / 2.0,
            config.mask_fill,
        )
    tamura = tamura_features(image)
    glcm = glcm_features(image, config.glcm_levels, config.glcm_distance)
    segments = detect_line_segments(image, config)
    return {
        "value": mean_brightness(image),
        "keypoints": float(
            keypoint_count(
                image,
                contrast_threshold=config.keypoint_contrast,
                edge_ratio=config.keypoint_edge_ratio,
                sigma=config.keypoint_sigma,
                intervals=config.keypoint_intervals,
            )
        ),
        "tamura.coarseness": tamura.coarseness,
        "tamura.contrast": tamura.contrast,
        "tamura.directionality": tamura.directionality,
        "glcm.contrast": glcm.contrast,
        "glcm.correlation": (
            glcm.correlation_value if glcm.correlation_value is not None else float("nan")
        ),
        "glcm.energy": glcm.energy,
        "glcm.homogeneity": glcm.homogeneity,
        "angles": float(dominant_orientation_count(segments)),
    }


def extract_feature_table(
    images: Sequence[Tuple[str, Path]], config: VisionConfig = VisionConfig(), workers: int = 1
) -> pd.DataFrame:
    """Extracts features for (stimulus id, image path) pairs, in parallel when workers > 1.

    Returns:
        DataFrame indexed by stimulus id (sorted) with one column per feature.
    """

    def extract(item: Tuple[str, Path]) -> Dict[str, float]:
        stimulus_id, path = item
        image = load_image(path, stimulus_id=stimulus_id)
        try:
            features = extract_cv_features(image, config)
        except VisionError as e:
            raise type(e)(f"Stimulus '{stimulus_id}': {e}")
        logger.debug(f"Extracted features for '{stimulus_id}'")
        return features

    ordered = sorted(images, key=lambda item: item[0])
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        rows = list(executor.map(extract, ordered))
    table = pd.DataFrame(
        rows,
        index=pd.Index([stimulus_id for stimulus_id, _ in ordered], name="stimulus_id"),
        columns=list(CV_FEATURE_NAMES),
    )
    logger.info(f"Extracted image features for {len(table)} stimuli")
    return table
