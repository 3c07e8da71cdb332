import warnings

import numpy as np
import pytest

from bsdomain import VolumeField, build_domain, build_surface, meshes, solve_tangential

Z_HAT = np.array([0.0, 0.0, 1.0])


def _domain(verts_faces, h):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_domain(build_surface(*verts_faces), h)


@pytest.fixture(scope="session")
def ball():
    """Reference unit ball: 1280 panels, h = 0.05."""
    return _domain(meshes.icosphere(3), 0.05)


@pytest.fixture(scope="session")
def ball_coarse():
    """320 panels, h = 0.1."""
    return _domain(meshes.icosphere(2), 0.1)


@pytest.fixture(scope="session")
def torus_model():
    return _domain(meshes.torus(), 0.05)


@pytest.fixture(scope="session")
def shell_model():
    return _domain(meshes.concentric_shell(2), 0.1)


@pytest.fixture(scope="session")
def ball_solution(ball):
    omega = VolumeField.constant(ball, Z_HAT)
    return omega, solve_tangential(ball, omega)


@pytest.fixture(scope="session")
def ball_coarse_solution(ball_coarse):
    omega = VolumeField.constant(ball_coarse, Z_HAT)
    return omega, solve_tangential(ball_coarse, omega)
