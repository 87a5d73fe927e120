import numpy as np
import pytest


def synthetic_natural(h=256, w=256, seed=7):
    """Deterministic natural-looking grayscale scene: smooth shading, hard
    edges and band-limited texture, so block codecs behave as on photos."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = 110.0 + 70.0 * np.sin(xx / 37.0) * np.cos(yy / 53.0) + 0.12 * (xx - yy)
    img[(yy - 0.35 * h) ** 2 + (xx - 0.4 * w) ** 2 < (0.18 * min(h, w)) ** 2] = 40.0
    img[int(0.6 * h) : int(0.85 * h), int(0.55 * w) : int(0.9 * w)] += 75.0
    img[int(0.15 * h) : int(0.3 * h), int(0.65 * w) : int(0.8 * w)] = 220.0
    noise = rng.normal(0.0, 12.0, size=(h, w))
    kernel = np.ones(5) / 5.0
    noise = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="same"), 1, noise)
    noise = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="same"), 0, noise)
    return np.clip(img + noise, 0.0, 255.0)


def camera_image():
    """256x256 natural test photo; falls back to a synthetic scene."""
    try:
        from skimage import data
    except ImportError:
        return synthetic_natural()
    cam = data.camera().astype(np.float64)
    return cam.reshape(256, 2, 256, 2).mean(axis=(1, 3))


@pytest.fixture(scope="session")
def natural_image():
    return camera_image()


@pytest.fixture(scope="session")
def natural_crop(natural_image):
    """64x64 crop with real structure, for fast codec tests."""
    return natural_image[96:160, 64:128].copy()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    seen = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if name not in seen or outcome in ("failed", "error"):
                seen[name] = outcome.upper()
    if not seen:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(seen):
        label = name.replace("test_", "").replace("_", " ")
        terminalreporter.write_line(f"{label}: {seen[name]}")
