"""Architecture builders: reference shapes, variants, init statistics."""

import numpy as np
import pytest

from topoform.errors import BuildError
from topoform.nn import (
    AE_VARIANT_UNITS,
    FC_VARIANT_HIDDEN,
    Conv,
    Crop,
    Dense,
    Model,
    autoencoder_for_field,
    build_autoencoder,
    build_regressor,
    regressor_variant,
    xavier_init,
)

from table_shapes import AE_2D_ROWS, AE_3D_ROWS, fc_rows, model_rows


def test_reference_2d_rows_exact():
    model = build_autoencoder((120, 40), head="sigmoid")
    assert model.input_shape == (120, 40, 1)
    assert model_rows(model) == AE_2D_ROWS


def test_reference_3d_rows_exact():
    model = build_autoencoder((60, 20, 4), head="sigmoid")
    assert model.input_shape == (60, 20, 4, 1)
    assert model_rows(model) == AE_3D_ROWS


def test_regressor_rows_exact():
    for n_par in (3, 4):
        model = build_regressor(n_par)
        assert model.input_shape == (n_par,)
        assert model_rows(model) == fc_rows(n_par)


def test_output_shape_equals_input_shape():
    for grid in ((120, 40), (60, 20, 4), (15, 7), (9, 6, 5)):
        model = build_autoencoder(grid, units=(8, 6, 4))
        assert model.output_shape == grid + (1,)


def test_bottleneck_splits_encoder_and_decoder():
    model = build_autoencoder((24, 12), units=(6, 4), latent=7)
    xavier_init(model, 3)
    split = model.bottleneck
    assert model.shapes[split] == (7,)
    x = np.random.default_rng(0).uniform(0, 1, (2, 24, 12, 1)).astype(np.float32)
    z = model.forward(x, training=False, stop=split)
    assert z.shape == (2, 7)
    full = model.forward(x, training=False)
    again = model.forward(z, training=False, start=split)
    assert (full == again).all()


def test_head_activation_by_field():
    for field, act in (("density", "sigmoid"), ("vm", "sigmoid"), ("tc", "none")):
        model = autoencoder_for_field((12, 6), field, units=(4, 3))
        head = next(ly for ly in model.layers if ly.name == "head")
        assert head.activation == act
    with pytest.raises(ValueError, match="field"):
        autoencoder_for_field((12, 6), "pressure")


def test_tc_head_can_go_negative():
    model = autoencoder_for_field((12, 6), "tc", units=(4, 3))
    xavier_init(model, 5)
    # push the head bias down; a sigmoid head could never emit negatives
    head = next(ly for ly in model.layers if ly.name == "head")
    head.params["b"][:] = -2.0
    x = np.random.default_rng(1).uniform(0, 1, (2, 12, 6, 1)).astype(np.float32)
    assert model.forward(x).min() < 0


def test_plus_variant_adds_one_deep_unit():
    ref = build_autoencoder((120, 40), units=AE_VARIANT_UNITS["ref"])
    plus = build_autoencoder((120, 40), units=AE_VARIANT_UNITS["plus"])
    minus = build_autoencoder((120, 40), units=AE_VARIANT_UNITS["minus"])
    n_conv = lambda m: sum(isinstance(ly, Conv) for ly in m.layers)
    # one unit = two conv layers, mirrored on both sides of the bottleneck
    assert n_conv(plus) == n_conv(ref) + 4
    assert n_conv(minus) == n_conv(ref) - 4
    # deepest encoder level shrinks / grows by one pooling halving
    assert plus.layer_index("latent") == ref.layer_index("latent") + 4
    flat_ref = ref.shapes[ref.layer_index("flatten") + 1]
    flat_plus = plus.shapes[plus.layer_index("flatten") + 1]
    flat_minus = minus.shapes[minus.layer_index("flatten") + 1]
    assert flat_ref == (2400,)
    assert flat_plus == (8 * 3 * 32,)
    assert flat_minus == (30 * 10 * 32,)


def test_plus_variant_crops_back_to_grid():
    plus = build_autoencoder((120, 40), units=AE_VARIANT_UNITS["plus"])
    assert isinstance(plus.layers[-1], Crop)
    assert plus.output_shape == (120, 40, 1)
    assert plus.layers[-1].margins == ((4, 4), (4, 4))
    minus = build_autoencoder((120, 40), units=AE_VARIANT_UNITS["minus"])
    assert not isinstance(minus.layers[-1], Crop)
    assert minus.output_shape == (120, 40, 1)


def test_fc_variants_change_hidden_pairs():
    ref = regressor_variant(3, "ref")
    plus = regressor_variant(3, "plus")
    minus = regressor_variant(3, "minus")
    n_dense = lambda m: sum(isinstance(ly, Dense) for ly in m.layers)
    assert (n_dense(minus), n_dense(ref), n_dense(plus)) == (2, 3, 4)
    assert FC_VARIANT_HIDDEN["plus"] == (720, 720, 720)
    assert FC_VARIANT_HIDDEN["minus"] == (720,)
    for m in (ref, plus, minus):
        assert m.output_shape == (40,)


def test_xavier_statistics():
    model = build_autoencoder((24, 12), units=(16, 16), latent=10)
    xavier_init(model, 0)
    for layer in model.layers:
        if isinstance(layer, (Conv, Dense)) and layer.params["w"].size >= 1000:
            w = layer.params["w"]
            if w.ndim == 2:
                fan_in, fan_out = w.shape
            else:
                k = int(np.prod(w.shape[:-2]))
                fan_in, fan_out = k * w.shape[-2], k * w.shape[-1]
            want = 2.0 / (fan_in + fan_out)
            assert w.var() == pytest.approx(want, rel=0.1), layer.name
        if "b" in layer.params:
            assert (layer.params["b"] == 0).all(), layer.name


def test_init_seed_determinism():
    a = xavier_init(build_autoencoder((12, 6), units=(4, 3)), 7)
    b = xavier_init(build_autoencoder((12, 6), units=(4, 3)), 7)
    c = xavier_init(build_autoencoder((12, 6), units=(4, 3)), 8)
    for (_, _, wa), (_, _, wb), (_, _, wc) in zip(
        a.parameters(), b.parameters(), c.parameters()
    ):
        np.testing.assert_array_equal(wa, wb)
    assert any(
        not np.array_equal(wa, wc)
        for (_, _, wa), (_, _, wc) in zip(a.parameters(), c.parameters())
    )


def test_bad_grids_rejected():
    with pytest.raises(ValueError):
        build_autoencoder((120,))
    with pytest.raises(ValueError):
        build_autoencoder((12, 0))
    with pytest.raises(ValueError):
        build_autoencoder((12, 6), units=(8,))
    with pytest.raises(ValueError):
        build_regressor(0)


def test_mismatched_stack_raises_build_error_with_name():
    from topoform.nn import Flatten, Reshape

    with pytest.raises(BuildError, match="bad_reshape"):
        Model([Flatten("f"), Reshape("bad_reshape", (7, 7))], (4, 3, 1))


def test_forward_smoke_reduced_2d():
    model = autoencoder_for_field((60, 20), "density", units=(8, 8), latent=16)
    xavier_init(model, 11)
    x = np.random.default_rng(2).uniform(0, 1, (4, 60, 20, 1)).astype(np.float32)
    y = model.forward(x, training=False)
    assert y.shape == x.shape
    assert ((y >= 0) & (y <= 1)).all()


def test_forward_smoke_reduced_3d():
    model = autoencoder_for_field((30, 10, 2), "vm", units=(6, 4), latent=12)
    xavier_init(model, 12)
    x = np.random.default_rng(3).uniform(0, 1, (2, 30, 10, 2, 1)).astype(np.float32)
    y = model.forward(x, training=False)
    assert y.shape == x.shape
