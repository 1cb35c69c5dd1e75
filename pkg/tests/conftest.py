import numpy as np
import pytest

from kfree.geometry import PolygonDomain


def random_convex_polygon(rng: np.random.Generator, scale: float = 1.0) -> PolygonDomain:
    """Strictly convex random polygon (hull of a Gaussian cloud)."""
    from scipy.spatial import ConvexHull

    while True:
        pts = rng.standard_normal((20, 2)) * scale
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]
        if len(verts) < 4:
            continue
        try:
            return PolygonDomain(verts)
        except Exception:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
