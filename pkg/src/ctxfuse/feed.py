"""Image feeds: what each node's camera sees at each sensing instant.

The synthetic feed renders one shared background scene. Each node sees it
with half of its field of view out of focus, a different half per node, so
no single view is sharp everywhere. Scene events are additive patches
pasted on the focused view: an event appears on odd-numbered rounds and is
gone on even-numbered ones, so a node's difference image is exactly the
event patch it saw. Critical events reuse the shared template patches, which
makes exact template matching meaningful.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .energy import MS_PER_DAY, MS_PER_HOUR
from .imagecore import Image, load_pgm, save_pgm

EVENT_LEVELS = 128          # event patches use values 1..128
BASE_MAX = 255 - EVENT_LEVELS
BLUR_SIGMA = 2.0

_SCENE, _EVENT, _VISIBLE, _TEMPLATE = 11, 12, 13, 14


class FeedError(LookupError):
    pass


def sensing_instants(config) -> list:
    """Simulated times (ms) of every sensing round, in order."""
    hours = config.sensing_hours()
    return [d * MS_PER_DAY + h * MS_PER_HOUR for d in range(config.days) for h in hours]


def _texture(rng, n, lo, hi):
    return rng.integers(lo, hi + 1, size=(n, n))


def _rect(rng, n, coverage):
    """Random axis-aligned rectangle mask with area close to ``coverage``."""
    area = max(1, int(round(coverage * n * n)))
    h = int(np.clip(rng.integers(max(1, area // n), n + 1), 1, n))
    w = int(np.clip(round(area / h), 1, n))
    y = int(rng.integers(0, n - h + 1))
    x = int(rng.integers(0, n - w + 1))
    m = np.zeros((n, n), dtype=bool)
    m[y:y + h, x:x + w] = True
    return m


@dataclass(frozen=True)
class _Event:
    patch: np.ndarray        # int64, zeros outside the event
    critical: bool


class SyntheticFeed:
    def __init__(self, config, seed: int | None = None):
        self.size = int(config.image_size)
        self.seed = int(config.seed if seed is None else seed)
        self.visibility = float(config.event_probability)
        self.critical_probability = float(config.critical_probability)
        self.instants = sensing_instants(config)
        self._round = {t: i for i, t in enumerate(self.instants)}
        n = self.size
        rng = np.random.default_rng([self.seed, _TEMPLATE])
        self.templates = []
        for _ in range(int(config.templates)):
            mask = _rect(rng, n, rng.uniform(0.75, 0.9))
            self.templates.append(Image.from_array(np.where(mask, _texture(rng, n, 1, EVENT_LEVELS), 0)))

    def round_of(self, at: float) -> int:
        try:
            return self._round[at]
        except KeyError:
            raise FeedError(f"no sensing round at t={at} ms") from None

    @lru_cache(maxsize=1)
    def scene(self) -> np.ndarray:
        n = self.size
        rng = np.random.default_rng([self.seed, _SCENE])
        coarse = gaussian_filter(rng.normal(size=(n, n)), n / 16)
        fine = gaussian_filter(rng.normal(size=(n, n)), 1.0)
        img = coarse / (np.abs(coarse).max() + 1e-12) + 0.6 * fine / (np.abs(fine).max() + 1e-12)
        for _ in range(6):
            m = _rect(rng, n, rng.uniform(0.01, 0.08))
            img[m] += rng.uniform(-0.8, 0.8)
        img -= img.min()
        return np.rint(img / img.max() * BASE_MAX).astype(np.int64)

    @lru_cache(maxsize=64)
    def degraded(self, node_id: int) -> np.ndarray:
        """Background as node ``node_id`` sees it: one half out of focus."""
        base = self.scene().astype(np.float64)
        blurred = gaussian_filter(base, BLUR_SIGMA, mode="reflect")
        n = self.size
        out = base.copy()
        side = node_id % 4
        if side == 0:
            out[:, : n // 2] = blurred[:, : n // 2]
        elif side == 1:
            out[:, n // 2:] = blurred[:, n // 2:]
        elif side == 2:
            out[: n // 2] = blurred[: n // 2]
        else:
            out[n // 2:] = blurred[n // 2:]
        return np.clip(np.rint(out), 0, BASE_MAX).astype(np.int64)

    @lru_cache(maxsize=64)
    def event(self, r: int) -> _Event | None:
        if r % 2 == 0:
            return None
        rng = np.random.default_rng([self.seed, r, _EVENT])
        if rng.random() < self.critical_probability:
            t = self.templates[int(rng.integers(len(self.templates)))]
            return _Event(t.pixels.astype(np.int64), True)
        mask = _rect(rng, self.size, rng.uniform(0.1, 0.95))
        return _Event(np.where(mask, _texture(rng, self.size, 1, EVENT_LEVELS), 0), False)

    def sees_event(self, node_id: int, r: int) -> bool:
        return np.random.default_rng([self.seed, node_id, r, _VISIBLE]).random() < self.visibility

    def frame(self, node_id: int, at: float) -> Image:
        r = self.round_of(at)
        px = self.degraded(node_id)
        ev = self.event(r)
        if ev is not None and self.sees_event(node_id, r):
            px = px + ev.patch
        return Image.from_array(px, 8)

    def truth(self, at: float) -> Image:
        r = self.round_of(at)
        ev = self.event(r)
        px = self.scene() if ev is None else self.scene() + ev.patch
        return Image.from_array(px, 8)


class DirectoryFeed:
    """Frames read from disk through ``manifest.txt`` whose tab-separated lines are
    ``frame <node> <time_ms> <file>``, ``truth <time_ms> <file>`` or ``template <file>``."""

    def __init__(self, directory):
        self.root = Path(directory)
        manifest = self.root / "manifest.txt"
        if not manifest.is_file():
            raise FeedError(f"image feed manifest missing: {manifest}")
        self._frames, self._truth, self.templates = {}, {}, []
        for lineno, line in enumerate(manifest.read_text().splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if parts[0] == "frame" and len(parts) == 4:
                self._frames[(int(parts[1]), float(parts[2]))] = parts[3]
            elif parts[0] == "truth" and len(parts) == 3:
                self._truth[float(parts[1])] = parts[2]
            elif parts[0] == "template" and len(parts) == 2:
                self.templates.append(load_pgm(self.root / parts[1]))
            else:
                raise FeedError(f"{manifest}:{lineno}: unrecognised entry {line!r}")

    def frame(self, node_id: int, at: float) -> Image:
        try:
            return load_pgm(self.root / self._frames[(node_id, float(at))])
        except KeyError:
            raise FeedError(f"no frame for node {node_id} at t={at} ms") from None

    def truth(self, at: float) -> Image | None:
        name = self._truth.get(float(at))
        return None if name is None else load_pgm(self.root / name)


def generate_feed(config, directory, seed: int | None = None) -> Path:
    """Write the synthetic feed for every sensor node and sensing round."""
    feed = SyntheticFeed(config, seed)
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, t in enumerate(feed.templates):
        name = f"template_{k}.pgm"
        save_pgm(t, root / name)
        lines.append(f"template\t{name}")
    for r, at in enumerate(feed.instants):
        name = f"truth_r{r:03d}.pgm"
        save_pgm(feed.truth(at), root / name)
        lines.append(f"truth\t{at!r}\t{name}")
        for node in range(1, config.num + 1):
            name = f"node{node:03d}_r{r:03d}.pgm"
            save_pgm(feed.frame(node, at), root / name)
            lines.append(f"frame\t{node}\t{at!r}\t{name}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")
    return root


def open_feed(config, seed: int | None = None):
    return DirectoryFeed(config.feed_dir) if config.feed_dir else SyntheticFeed(config, seed)
