import numpy as np
import pytest

from gazedyn.core import FeatureConfig, FeatureMode, GazeZone, Scanpath, zone_code

FPS = 30

F = zone_code(GazeZone.FRONT)
R = zone_code(GazeZone.RIGHT)
L = zone_code(GazeZone.LEFT)
CS = zone_code(GazeZone.CENTER_STACK)
RV = zone_code(GazeZone.REARVIEW)
SPD = zone_code(GazeZone.SPEEDOMETER)
U = zone_code(GazeZone.UNKNOWN)


def sp(codes, fps=FPS, driver="d", drive="x") -> Scanpath:
    return Scanpath(np.asarray(codes, dtype=np.int8), fps, driver, drive)


def runs(*pairs) -> list[int]:
    """runs((code, n), ...) -> flat code list."""
    out = []
    for code, n in pairs:
        out.extend([code] * n)
    return out


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def ga_config():
    return FeatureConfig(mode=FeatureMode.GA)


@pytest.fixture(scope="session")
def mini_corpus():
    """Two-driver corpus, small but with full-rank per-class covariances
    when fitted on both drivers together (16 > 9 samples per LC class)."""
    from gazedyn.synth import generate_corpus

    return generate_corpus(
        counts=((8, 8, 12), (8, 8, 12)), master_seed=11, fps=FPS
    )
