import math

import numpy as np
import pytest

from archreg.transforms import (RigidTransform, TransformParams, apply,
                                apply_normal, compose, invert,
                                params_to_transform, transform_to_params,
                                wrap_angle)
from conftest import random_params


def test_zero_params_is_identity():
    t = params_to_transform(TransformParams())
    assert np.allclose(t.rotation, np.eye(3))
    assert np.allclose(t.translation, 0.0)


def test_quarter_turn_about_z():
    t = params_to_transform(TransformParams(0, 0, math.pi / 2, 0, 0, 0))
    assert np.allclose(apply(t, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_params_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = random_params(rng, rot=1.4)
        q = transform_to_params(params_to_transform(p))
        assert np.allclose(p.as_array(), q.as_array(), atol=1e-9)


def test_rotation_is_orthonormal():
    rng = np.random.default_rng(2)
    for _ in range(50):
        t = params_to_transform(random_params(rng, rot=math.pi * 0.9))
        assert t.is_valid(tol=1e-9)
        x = rng.normal(size=3)
        assert abs(np.linalg.norm(t.rotation @ x) - np.linalg.norm(x)) < 1e-9


def test_invert_identity():
    ident = RigidTransform.identity()
    inv = invert(ident)
    assert np.allclose(inv.rotation, np.eye(3))
    assert np.allclose(inv.translation, 0.0)


def test_apply_normal_ignores_translation():
    t = params_to_transform(TransformParams(0, 0, 0, 4.0, -2.0, 9.0))
    n = np.array([0.0, 0.0, 1.0])
    assert np.allclose(apply_normal(t, n), n)


def test_apply_normal_preserves_angles():
    rng = np.random.default_rng(3)
    for _ in range(50):
        t = params_to_transform(random_params(rng, rot=math.pi * 0.9))
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        assert abs(apply_normal(t, a) @ apply_normal(t, b) - a @ b) < 1e-9


def test_compose_and_invert_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(100):
        t = params_to_transform(random_params(rng, rot=math.pi * 0.9))
        p = rng.uniform(-50, 50, 3)
        back = apply(compose(invert(t), t), p)
        assert np.linalg.norm(back - p) < 1e-9


def test_compose_order():
    rng = np.random.default_rng(5)
    a = params_to_transform(random_params(rng))
    b = params_to_transform(random_params(rng))
    p = rng.normal(size=3)
    assert np.allclose(apply(compose(a, b), p), apply(a, apply(b, p)), atol=1e-12)


def test_batch_apply_matches_single():
    rng = np.random.default_rng(6)
    t = params_to_transform(random_params(rng))
    pts = rng.uniform(-10, 10, (20, 3))
    batch = apply(t, pts)
    for i in range(20):
        assert np.allclose(batch[i], apply(t, pts[i]))


def test_wrap_angle_principal_range():
    for a in np.linspace(-10, 10, 201):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert abs(math.sin(w) - math.sin(a)) < 1e-12
        assert abs(math.cos(w) - math.cos(a)) < 1e-12


def test_params_from_array_validates_shape():
    with pytest.raises(ValueError):
        TransformParams.from_array([1.0, 2.0])
