import json

import numpy as np
import pytest

from denstree.conditional import CondLearnConfig, ConditionalSpec, learn_approx, learn_cart, learn_stratified
from denstree.datagen import generate_mixture2d
from denstree.errors import ModelFormatError
from denstree.schema import Dataset
from denstree.serialize import decode_model, encode_model
from denstree.tree import DistLeafBuilder, GrowConfig, grow_tree, smooth_tree, tree_log_density


@pytest.fixture(scope="module")
def data():
    return generate_mixture2d(1200, 99)


def _grown_tree(data, family):
    schema = data.schema
    cfg = GrowConfig(branch_vars=(0, 1), score_target="joint", leaf_family=family, seed=4)
    builder = DistLeafBuilder(schema, family, (0, 1), cfg)
    return grow_tree(data, schema.root_box(), cfg, builder)


class TestTreeRoundTrip:
    @pytest.mark.parametrize("family", ["uniform", "linear", "multilinear", "gauss"])
    def test_log_densities_bit_identical(self, data, family, rng):
        tree = _grown_tree(data, family)
        again = decode_model(encode_model(tree))
        pts = rng.random((100, 2))
        assert np.array_equal(tree_log_density(tree, pts), tree_log_density(again, pts))

    def test_mass_conservation_after_decode(self, data):
        tree = _grown_tree(data, "linear")
        again = decode_model(encode_model(tree))
        assert abs(sum(l.mass for l in again.leaves) - 1.0) <= 1e-12
        assert [l.leaf_id for l in again.leaves] == [l.leaf_id for l in tree.leaves]

    def test_smoothed_tree_round_trip(self, data, rng):
        sm = smooth_tree(_grown_tree(data, "multilinear"), 1e-3)
        again = decode_model(encode_model(sm))
        pts = rng.random((50, 2))
        assert np.array_equal(sm.log_density(pts), again.log_density(pts))


class TestConditionalRoundTrip:
    def test_cart_and_stratified(self, data, rng):
        spec = ConditionalSpec(1, (0,))
        pts = rng.random((100, 2))
        for learner, family in ((learn_cart, "gauss"), (learn_stratified, "linear")):
            model = learner(data, spec, CondLearnConfig(leaf_family=family, seed=3))
            again = decode_model(encode_model(model))
            assert np.array_equal(model.cond_log_density(pts), again.cond_log_density(pts))

    def test_approx_round_trip_preserves_coefs(self, data, rng):
        spec = ConditionalSpec(1, (0,))
        model = learn_approx(data, spec, CondLearnConfig(leaf_family="linear", seed=3))
        again = decode_model(encode_model(model))
        pts = rng.random((200, 2))
        assert np.array_equal(model.cond_log_density(pts), again.cond_log_density(pts))


class TestMalformed:
    def test_truncated_file(self, data):
        blob = encode_model(_grown_tree(data, "uniform"))
        with pytest.raises(ModelFormatError):
            decode_model(blob[: len(blob) // 2])

    def test_version_mismatch(self, data):
        doc = json.loads(encode_model(_grown_tree(data, "uniform")))
        doc["version"] = 999
        with pytest.raises(ModelFormatError, match="version"):
            decode_model(json.dumps(doc).encode())

    def test_wrong_format_marker(self):
        with pytest.raises(ModelFormatError):
            decode_model(b'{"format": "something-else", "version": 1}')

    def test_garbage_bytes(self):
        with pytest.raises(ModelFormatError):
            decode_model(b"\x00\x01\x02 not json")
