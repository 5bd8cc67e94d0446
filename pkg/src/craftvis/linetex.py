"""Synthesize arbitrarily long line textures from a short scanned strip.

The source is treated as a vertical sequence of rows.  A row-to-row
similarity matrix drives a Markov walk that mostly advances to the next
source row but occasionally jumps to a visually similar row, which lets a
short scan grow into a long, non-repeating strip.  A generously oversized
buffer is synthesized first and the final image is the window whose first
row best matches the row just past its end, so the result tiles
seamlessly in the vertical direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .color import srgb_to_lab
from .texture import TextureImage

BUFFER_FACTOR = 5


@dataclass(frozen=True)
class RowSimilarity:
    """Symmetric row-distance matrix with zero diagonal.

    ``distances[i, j]`` is the root mean square CIE76 difference between
    rows i and j across their pixels, so 0 means identical rows.
    """

    distances: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distances must be a square matrix")
        object.__setattr__(self, "distances", d)

    @property
    def size(self) -> int:
        return self.distances.shape[0]


def row_similarity(source: TextureImage) -> RowSimilarity:
    """Compute pairwise row distances for a source strip.

    Rows are compared in Lab:  D[i, j] = sqrt(mean_x |lab_i(x) - lab_j(x)|^2).
    Uses the Gram-matrix identity so the cost is one (H, W*3) matmul
    instead of an H^2 scan over pixel rows.
    """
    lab = srgb_to_lab(source.rgb).reshape(source.height, -1)
    sq = np.einsum("ij,ij->i", lab, lab)
    gram = lab @ lab.T
    w = source.width
    d2 = (sq[:, None] + sq[None, :] - 2.0 * gram) / w
    d = np.sqrt(np.clip(d2, 0.0, None))
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return RowSimilarity(d)


@dataclass(frozen=True)
class SynthesisParams:
    """Knobs for the Markov row walk.

    ``jump_probability`` is the chance of attempting a jump at each step;
    ``min_quality`` caps the row distance a jump may cross;
    ``min_jump_size`` is the minimum row-index distance of a jump;
    ``output_height`` is the height of the final (loop-trimmed) image.
    """

    jump_probability: float = 0.1
    min_quality: float = 10.0
    min_jump_size: int = 1
    output_height: int = 2048
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.jump_probability <= 1.0:
            raise ValueError("jump_probability must lie in [0, 1]")
        if self.min_quality < 0.0 or not np.isfinite(self.min_quality):
            raise ValueError("min_quality must be finite and >= 0")
        if self.min_jump_size < 1:
            raise ValueError("min_jump_size must be >= 1")
        if self.output_height < 2:
            raise ValueError("output_height must be >= 2")


@dataclass(frozen=True)
class SynthesisResult:
    """Output of :func:`synthesize`.

    ``rows`` are the source-row indices of the final image, top to
    bottom.  ``buffer_rows`` is the full walk (``BUFFER_FACTOR`` times
    the output height) and ``loop_start`` the window offset chosen by
    :func:`find_loop`, kept for reproducibility sidecars.
    """

    image: TextureImage
    rows: np.ndarray
    buffer_rows: np.ndarray = field(repr=False)
    loop_start: int = 0
    params: SynthesisParams = SynthesisParams()

    def sidecar(self) -> dict:
        return {
            "params": asdict(self.params),
            "loop_start": int(self.loop_start),
            "buffer_height": int(len(self.buffer_rows)),
            "rows": [int(r) for r in self.rows],
        }


def _walk_rows(similarity: RowSimilarity, params: SynthesisParams, steps: int) -> np.ndarray:
    """Run the Markov walk for ``steps`` rows, starting at row 0."""
    d = similarity.distances
    h = similarity.size
    sigma = float(d.mean())
    # Precompute, per landing row, the allowed jump targets and their weights.
    candidates: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    idx = np.arange(h)
    for n in range(h):
        mask = (d[n] <= params.min_quality) & (np.abs(idx - n) >= params.min_jump_size)
        cand = idx[mask]
        candidates.append(cand)
        if len(cand) > 0:
            if sigma > 0.0:
                w = np.exp(-d[n, cand] / sigma)
            else:
                w = np.ones(len(cand))
            weights.append(w / w.sum())
        else:
            weights.append(np.empty(0))

    rng = np.random.default_rng(params.seed)
    rows = np.empty(steps, dtype=np.int64)
    r = 0
    rows[0] = r
    for i in range(1, steps):
        nxt = (r + 1) % h
        if params.jump_probability > 0.0 and rng.random() < params.jump_probability \
                and len(candidates[nxt]) > 0:
            nxt = int(rng.choice(candidates[nxt], p=weights[nxt]))
        r = nxt
        rows[i] = r
    return rows


def find_loop(buffer_rows: np.ndarray, similarity: RowSimilarity, output_height: int) -> int:
    """Window offset whose seam (first row vs row just past the end) is best.

    Scans every start ``s`` with ``s + output_height < len(buffer_rows)``
    and returns the one minimizing
    ``D[buffer_rows[s], buffer_rows[s + output_height]]``; ties go to the
    smallest ``s``.  A window starting there tiles vertically with the
    smallest visible jump at the wrap point.
    """
    buffer_rows = np.asarray(buffer_rows)
    n = len(buffer_rows) - output_height
    if n < 1:
        raise ValueError("buffer shorter than output_height + 1")
    starts = buffer_rows[:n]
    ends = buffer_rows[output_height:output_height + n]
    seam = similarity.distances[starts, ends]
    return int(np.argmin(seam))


def synthesize(source: TextureImage, params: SynthesisParams | None = None,
               similarity: RowSimilarity | None = None) -> SynthesisResult:
    """Grow a long line texture from a short source strip.

    Walks the source rows (advance by one, wrap at the end, jump with
    probability ``jump_probability`` to rows within ``min_quality``
    distance and at least ``min_jump_size`` away, weighted by
    ``exp(-distance / sigma)`` with sigma the mean row distance), fills a
    buffer ``BUFFER_FACTOR * output_height`` rows tall, then emits the
    best seamlessly-looping window.  Deterministic for a given seed.
    """
    if params is None:
        params = SynthesisParams()
    if source.height < 2:
        raise ValueError("source must have at least 2 rows")
    if similarity is None:
        similarity = row_similarity(source)
    elif similarity.size != source.height:
        raise ValueError("similarity matrix size does not match source height")

    buffer_len = BUFFER_FACTOR * params.output_height
    buffer_rows = _walk_rows(similarity, params, buffer_len)
    start = find_loop(buffer_rows, similarity, params.output_height)
    rows = buffer_rows[start:start + params.output_height]
    image = TextureImage(source.pixels[rows].copy(), physical_scale=source.physical_scale)
    return SynthesisResult(image=image, rows=rows, buffer_rows=buffer_rows,
                           loop_start=start, params=params)


def save_synthesis(result: SynthesisResult, png_path) -> Path:
    """Write the synthesized strip plus a JSON reproducibility sidecar."""
    png_path = Path(png_path)
    result.image.save(png_path)
    sidecar = png_path.with_suffix(".json")
    sidecar.write_text(json.dumps(result.sidecar(), indent=2))
    return sidecar
