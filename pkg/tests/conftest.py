import numpy as np
import pytest

from polymesh import (ConvexBody, DirectionSet, MetricContext, NormalizedBody, john_normalize)


def ball_body(center=(0.0, 0.0), radius=1.0):
    return ConvexBody.from_dict(
        {"dim": len(center), "shape": {"type": "ball", "center": list(center), "radius": radius}}
    )


def square_vpoly():
    return ConvexBody.from_dict(
        {"dim": 2, "shape": {"type": "vpolytope",
                             "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]]}}
    )


def square_hpoly():
    return ConvexBody.from_dict(
        {"dim": 2, "shape": {"type": "hpolytope", "halfspaces": [
            {"normal": [1, 0], "offset": 1}, {"normal": [-1, 0], "offset": 1},
            {"normal": [0, 1], "offset": 1}, {"normal": [0, -1], "offset": 1}]}}
    )


def sevengon_hpoly(seed=19):
    """Random convex 7-gon with vertices on the unit circle, as halfspaces."""
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 7))
    verts = np.column_stack([np.cos(ang), np.sin(ang)])
    hs = []
    for i in range(7):
        a, b = verts[i], verts[(i + 1) % 7]
        edge = b - a
        nrm = np.array([edge[1], -edge[0]])
        nrm /= np.linalg.norm(nrm)
        if nrm @ a < 0:
            nrm = -nrm
        hs.append({"normal": nrm.tolist(), "offset": float(nrm @ a)})
    return ConvexBody.from_dict({"dim": 2, "shape": {"type": "hpolytope", "halfspaces": hs}})


def ellipsoid_body(diag=(4.0, 1.0)):
    d = len(diag)
    axes = np.diag(diag).tolist()
    return ConvexBody.from_dict(
        {"dim": d, "shape": {"type": "ellipsoid", "center": [0.0] * d, "axes": axes}}
    )


@pytest.fixture(scope="session")
def disk():
    return ball_body()


@pytest.fixture(scope="session")
def disk_normalized(disk):
    return john_normalize(disk)


@pytest.fixture(scope="session")
def disk_ctx(disk_normalized):
    return MetricContext.create(disk_normalized)


@pytest.fixture(scope="session")
def unit_disk_ctx(disk):
    """Identity-frame context on the unit disk (no John scaling)."""
    return MetricContext.create(NormalizedBody.wrap(disk))


@pytest.fixture(scope="session")
def square():
    return square_hpoly()


@pytest.fixture(scope="session")
def square_normalized(square):
    return john_normalize(square)


@pytest.fixture(scope="session")
def square_ctx(square_normalized):
    return MetricContext.create(square_normalized)


@pytest.fixture(scope="session")
def small_disk_ctx(disk_normalized):
    """Coarser direction set for fast unit tests."""
    return MetricContext.create(disk_normalized, DirectionSet.angular(512))
