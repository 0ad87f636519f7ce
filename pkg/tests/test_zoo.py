import pytest

from attonet import (
    LayerKind,
    bind_channels,
    build_attonet,
    build_prototype,
    dumps,
    infer_shapes,
    validate,
)
from attonet.zoo import NUM_CLASSES, PrototypeConfig, prototype_stage_sizes

from reference import CONV_LAYER_COUNT, SHAPE_COLUMN

VARIANTS = ("A", "B", "C", "D")
PROJECTION_POSITIONS = (1, 4, 8, 14)


def conv_dense_count(net):
    convs = [net.stem_conv]
    for mod in net.modules:
        convs += [mod.compress, mod.group_conv, mod.mix, mod.decompress]
        if mod.shortcut.kind is LayerKind.CONV:
            convs.append(mod.shortcut)
    return len(convs), 1  # dense head


class TestBuilders:
    def test_variant_a_module1(self, networks):
        m1 = networks["A"].modules[0]
        assert m1.compress.out_channels == 8
        assert m1.group_conv.out_channels == 32
        assert m1.group_conv.kernel == (3, 3)
        assert m1.mix.out_channels == 16
        assert m1.decompress.out_channels == 176
        assert m1.shortcut.kind is LayerKind.CONV
        assert m1.shortcut.out_channels == 176
        assert m1.shortcut.stride == 1

    def test_variant_d_stem(self, networks):
        stem = networks["D"].stem_conv
        assert stem.kernel == (7, 7)
        assert stem.out_channels == 3
        assert stem.stride == 2

    def test_variant_c_module14_group_layer(self, networks):
        g = networks["C"].modules[13].group_conv
        assert g.out_channels == 134
        assert g.stride == 2
        # groups of two filters each, one input channel per group
        assert g.out_channels % g.groups == 0
        assert g.out_channels // g.groups == 2
        assert g.groups == 67

    def test_group_layers_split_one_input_channel_per_group(self, bound_networks):
        for bound in bound_networks.values():
            for layer in bound.layers:
                if layer.layer_id.endswith(".group_conv"):
                    assert layer.spec.groups == layer.in_channels

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            build_attonet("E")

    def test_builders_are_byte_stable(self):
        for v in VARIANTS:
            assert dumps(build_attonet(v)) == dumps(build_attonet(v))


class TestFamilyInvariants:
    def test_all_variants_validate_without_errors(self, networks):
        for v, net in networks.items():
            assert validate(net).ok, v

    def test_sixteen_modules_each(self, networks):
        for net in networks.values():
            assert len(net.modules) == 16

    def test_projection_positions(self, networks):
        for net in networks.values():
            positions = tuple(
                i for i, mod in enumerate(net.modules, 1) if mod.module_type == "B")
            assert positions == PROJECTION_POSITIONS
            for i, mod in enumerate(net.modules, 1):
                if mod.module_type == "B":
                    assert mod.shortcut.kind is LayerKind.CONV
                else:
                    assert mod.shortcut.kind is LayerKind.IDENTITY

    def test_strided_modules(self, networks):
        for net in networks.values():
            for i, mod in enumerate(net.modules, 1):
                expected = 2 if i in (4, 8, 14) else 1
                assert mod.group_conv.stride == expected, (net.name, i)

    def test_layer_count_constant_across_family(self, networks):
        counts = {v: conv_dense_count(net) for v, net in networks.items()}
        assert len(set(counts.values())) == 1
        convs, dense = counts["A"]
        assert convs == CONV_LAYER_COUNT
        assert dense == 1

    def test_dense_head_width(self, networks):
        for net in networks.values():
            assert net.head_dense.out_channels == NUM_CLASSES == 51

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_output_size_column(self, networks, variant):
        shapes = dict(infer_shapes(networks[variant]))
        assert shapes["stem.conv"].height == SHAPE_COLUMN["stem.conv"]
        assert shapes["stem.pool"].height == SHAPE_COLUMN["stem.pool"]
        for i in range(1, 17):
            if i <= 3:
                expected = SHAPE_COLUMN["modules_1_3"]
            elif i <= 7:
                expected = SHAPE_COLUMN["modules_4_7"]
            elif i <= 13:
                expected = SHAPE_COLUMN["modules_8_13"]
            else:
                expected = SHAPE_COLUMN["modules_14_16"]
            shape = shapes[f"m{i:02d}.decompress"]
            assert (shape.height, shape.width) == (expected, expected), i
        pooled = shapes["head.pool"]
        assert (pooled.height, pooled.width) == (1, 1)

    def test_stage_widths_constant(self, networks):
        for net in networks.values():
            stages = [(1, 3), (4, 7), (8, 13), (14, 16)]
            for lo, hi in stages:
                widths = {net.modules[i - 1].decompress.out_channels
                          for i in range(lo, hi + 1)}
                assert len(widths) == 1


class TestPrototype:
    def test_default_prototype(self):
        net = build_prototype()
        assert len(net.modules) == 16
        assert net.head_softmax.kind is LayerKind.SOFTMAX
        assert validate(net).ok
        assert all(mod.free_micro for mod in net.modules)

    def test_downsampling_matches_family_layout(self):
        net = build_prototype()
        positions = tuple(i for i, m in enumerate(net.modules, 1) if m.module_type == "B")
        assert positions == PROJECTION_POSITIONS

    def test_final_feature_map_is_7x7(self):
        net = build_prototype()
        shapes = dict(infer_shapes(net))
        tail = shapes["m16.decompress"]
        assert (tail.height, tail.width) == (7, 7)

    def test_single_module_prototype_is_legal(self):
        net = build_prototype(PrototypeConfig(num_modules=1))
        assert len(net.modules) == 1
        assert net.modules[0].module_type == "B"
        assert validate(net).ok
        shapes = dict(infer_shapes(net))
        assert (shapes["head.pool"].height, shapes["head.pool"].width) == (1, 1)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 16, 23])
    def test_stage_sizes_partition_the_chain(self, n):
        sizes = prototype_stage_sizes(n)
        assert sum(sizes) == n
        assert sizes[0] >= 1
        assert all(s >= 0 for s in sizes)

    def test_sixteen_module_stage_split(self):
        assert prototype_stage_sizes(16) == [3, 4, 6, 3]

    def test_custom_classes(self):
        net = build_prototype(PrototypeConfig(num_classes=10))
        assert net.head_dense.out_channels == 10

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            PrototypeConfig(num_modules=0)
