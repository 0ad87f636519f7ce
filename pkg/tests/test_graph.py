import pytest
from hypothesis import given
from hypothesis import strategies as st

from attonet import (
    LayerKind,
    LayerSpec,
    ModuleSpec,
    NetworkSpec,
    TensorShape,
    bind_channels,
    build_attonet,
    build_prototype,
    dumps,
    infer_shapes,
    loads,
    spec_digest,
    validate,
)
from attonet.errors import ChannelMismatchError, ShapeUnderflowError, SpecFormatError
from attonet.graph import conv_out_hw, from_document, group_splits, to_document
from attonet.zoo import PrototypeConfig


def tiny_module(module_in=4, *, module_type="A", group_stride=1, decompress_out=None,
                shortcut=None):
    """A small hand-built module; defaults form a valid Type A block."""
    decompress_out = module_in if decompress_out is None else decompress_out
    if shortcut is None:
        shortcut = (LayerSpec.identity() if module_type == "A"
                    else LayerSpec.conv(decompress_out, 1, stride=group_stride))
    return ModuleSpec(
        module_type=module_type,
        compress=LayerSpec.conv(2, 1, activation="relu"),
        group_conv=LayerSpec.conv(4, 3, groups=2, stride=group_stride, activation="relu"),
        mix=LayerSpec.conv(3, 1, activation="relu"),
        decompress=LayerSpec.conv(decompress_out, 1),
        shortcut=shortcut,
    )


def tiny_network(modules=None, input_hw=32):
    modules = modules if modules is not None else (tiny_module(),)
    return NetworkSpec(
        name="tiny",
        input_shape=TensorShape(3, input_hw, input_hw),
        stem_conv=LayerSpec.conv(4, 3, stride=2, activation="relu"),
        stem_pool=LayerSpec.max_pool(3, stride=2),
        modules=tuple(modules),
        head_pool=LayerSpec.avg_pool(input_hw // 4),
        head_dense=LayerSpec.dense(5),
        head_softmax=LayerSpec.softmax(),
    )


class TestShapeMath:
    def test_stem_conv_224_to_112(self):
        assert conv_out_hw(224, 7, 2, 3) == 112

    def test_max_pool_112_to_56(self):
        assert conv_out_hw(112, 3, 2, 1) == 56

    def test_full_extent_avg_pool_to_1(self):
        assert conv_out_hw(7, 7, 1, 0) == 1

    def test_infer_shapes_is_deterministic(self):
        net = build_attonet("B")
        assert infer_shapes(net) == infer_shapes(net)

    def test_underflow_raises_with_layer_id(self):
        net = tiny_network(input_hw=16)
        # head pool window larger than the remaining 4x4 extent
        net = NetworkSpec(
            name=net.name, input_shape=net.input_shape,
            stem_conv=net.stem_conv, stem_pool=net.stem_pool, modules=net.modules,
            head_pool=LayerSpec.avg_pool(9),
            head_dense=net.head_dense, head_softmax=net.head_softmax,
        )
        with pytest.raises(ShapeUnderflowError) as err:
            infer_shapes(net)
        assert err.value.layer_id == "head.pool"


class TestTensorShape:
    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, 0, 1), (1, 1, -3)])
    def test_rejects_non_positive_dims(self, bad):
        with pytest.raises(ValueError):
            TensorShape(*bad)

    def test_size(self):
        assert TensorShape(3, 224, 224).size == 3 * 224 * 224


class TestGroupSplits:
    def test_uneven_seven_over_four(self):
        assert group_splits(7, 4) == [2, 2, 2, 1]

    @given(st.integers(1, 400), st.integers(1, 32))
    def test_split_properties(self, total, groups):
        if groups > total:
            groups = total
        parts = group_splits(total, groups)
        assert sum(parts) == total
        assert len(parts) == groups
        assert parts == sorted(parts, reverse=True)
        assert max(parts) - min(parts) <= 1


class TestValidate:
    def test_builder_output_is_clean(self):
        report = validate(build_attonet("A"))
        assert report.violations == ()

    def test_residual_shape_mismatch(self):
        net = tiny_network((tiny_module(decompress_out=6),))  # identity carries 4
        codes = validate(net).codes()
        assert "residual_shape_mismatch" in codes

    def test_type_a_stride_violation(self):
        bad = tiny_module(group_stride=2, shortcut=LayerSpec.identity())
        net = tiny_network((bad,), input_hw=64)
        assert "type_a_stride" in validate(net).codes()

    def test_type_a_with_projection_flagged(self):
        bad = tiny_module(shortcut=LayerSpec.conv(4, 1))
        net = tiny_network((bad,))
        assert "type_a_shortcut" in validate(net).codes()

    def test_type_b_requires_projection(self):
        bad = tiny_module(module_type="B", shortcut=LayerSpec.identity())
        net = tiny_network((bad,))
        assert "type_b_shortcut" in validate(net).codes()

    def test_projection_stride_must_match_group_conv(self):
        bad = tiny_module(module_type="B", group_stride=2,
                          shortcut=LayerSpec.conv(4, 1, stride=1))
        net = tiny_network((bad,), input_hw=64)
        assert "projection_stride_mismatch" in validate(net).codes()

    def test_groups_exceeding_channels_is_an_error(self):
        mod = tiny_module()
        bad = ModuleSpec(
            module_type="A",
            compress=LayerSpec.conv(2, 1),
            group_conv=LayerSpec.conv(4, 3, groups=8),  # in will be 2
            mix=mod.mix,
            decompress=mod.decompress,
            shortcut=LayerSpec.identity(),
        )
        report = validate(tiny_network((bad,)))
        assert "groups_exceed_channels" in [v.code for v in report.errors]

    def test_uneven_groups_warn_but_do_not_invalidate(self):
        mod = ModuleSpec(
            module_type="A",
            compress=LayerSpec.conv(7, 1),
            group_conv=LayerSpec.conv(28, 3, groups=4),  # 7 channels over 4 groups
            mix=LayerSpec.conv(3, 1),
            decompress=LayerSpec.conv(4, 1),
            shortcut=LayerSpec.identity(),
        )
        report = validate(tiny_network((mod,)))
        assert report.ok
        assert "uneven_groups" in [v.code for v in report.warnings]

    def test_width_profile_warning_on_variant_d(self):
        report = validate(build_attonet("D"))
        assert report.ok
        assert [v.where for v in report.warnings] == ["m03.mix"]

    def test_violations_come_in_walk_order(self):
        bad1 = tiny_module(group_stride=2, shortcut=LayerSpec.identity())
        bad2 = tiny_module(decompress_out=9)
        net = tiny_network((bad1, bad2), input_hw=64)
        codes = [v.where for v in validate(net).errors]
        assert codes.index("m01") < codes.index("m02")

    def test_stride_out_of_range(self):
        net = tiny_network((tiny_module(),))
        bad = NetworkSpec(
            name=net.name, input_shape=net.input_shape,
            stem_conv=LayerSpec.conv(4, 3, stride=3),
            stem_pool=net.stem_pool, modules=net.modules,
            head_pool=net.head_pool, head_dense=net.head_dense,
            head_softmax=net.head_softmax,
        )
        assert "stride_out_of_range" in validate(bad).codes()


class TestBindChannels:
    def test_second_module_compress_binds_to_stage_width(self, bound_networks):
        assert bound_networks["A"]["m02.compress"].in_channels == 176

    def test_identity_shortcut_binds_in_equals_out(self, bound_networks):
        layer = bound_networks["A"]["m02.shortcut"]
        assert layer.in_channels == layer.out_channels == 176

    def test_uneven_weight_splits(self):
        mod = ModuleSpec(
            module_type="A",
            compress=LayerSpec.conv(7, 1),
            group_conv=LayerSpec.conv(28, 3, groups=4),
            mix=LayerSpec.conv(3, 1),
            decompress=LayerSpec.conv(4, 1),
            shortcut=LayerSpec.identity(),
        )
        bound = bind_channels(tiny_network((mod,)))
        splits = bound["m01.group_conv"].weight_splits()
        assert [i for i, _ in splits] == [2, 2, 2, 1]
        assert sum(i for i, _ in splits) == 7

    def test_groups_exceed_channels_raises(self):
        mod = ModuleSpec(
            module_type="A",
            compress=LayerSpec.conv(2, 1),
            group_conv=LayerSpec.conv(4, 3, groups=8),
            mix=LayerSpec.conv(3, 1),
            decompress=LayerSpec.conv(4, 1),
            shortcut=LayerSpec.identity(),
        )
        with pytest.raises(ChannelMismatchError) as err:
            bind_channels(tiny_network((mod,)))
        assert "m01.group_conv" in str(err.value)

    def test_valid_network_binds_and_infers_without_raising(self, networks):
        for net in networks.values():
            assert validate(net).ok
            bind_channels(net)
            infer_shapes(net)


class TestSerialization:
    @pytest.mark.parametrize("variant", ["A", "B", "C", "D"])
    def test_round_trip_variants(self, networks, variant):
        net = networks[variant]
        assert loads(dumps(net)) == net

    def test_round_trip_prototype(self):
        net = build_prototype(PrototypeConfig(num_modules=5))
        assert loads(dumps(net)) == net

    def test_unknown_top_level_key_rejected(self, networks):
        doc = to_document(networks["D"])
        doc["extra"] = 1
        with pytest.raises(SpecFormatError):
            from_document(doc)

    def test_unknown_layer_key_rejected(self, networks):
        doc = to_document(networks["D"])
        doc["stem"]["conv"]["dilation"] = 2
        with pytest.raises(SpecFormatError):
            from_document(doc)

    def test_unknown_module_key_rejected(self, networks):
        doc = to_document(networks["D"])
        doc["modules"][0]["notes"] = "hello"
        with pytest.raises(SpecFormatError):
            from_document(doc)

    def test_malformed_json_rejected(self):
        with pytest.raises(SpecFormatError):
            loads("{not json")

    def test_digest_is_stable_and_discriminates(self, networks):
        a1 = spec_digest(networks["A"])
        a2 = spec_digest(build_attonet("A"))
        assert a1 == a2
        assert a1 != spec_digest(networks["B"])

    def test_layer_document_shape(self, networks):
        doc = to_document(networks["A"])
        conv = doc["modules"][0]["group_conv"]
        assert conv["kind"] == "conv"
        assert conv["kernel"] == [3, 3]
        assert set(conv) <= {"kind", "kernel", "out", "groups", "stride", "pad",
                             "bias", "act", "norm"}
