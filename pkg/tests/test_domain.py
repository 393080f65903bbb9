import math
import random

import pytest

from hoikit import (
    BBox,
    GtImage,
    GtPair,
    NOT_FOUND,
    Vocabulary,
    box_from_values,
    iou,
    normalize_name,
    pair_similarity,
)


def test_box_corners_are_canonicalized():
    box = BBox(10, 20, 3, 5)
    assert (box.x1, box.y1, box.x2, box.y2) == (3, 5, 10, 20)
    assert box == BBox(3, 5, 10, 20)


def test_box_area_and_clamp():
    box = BBox(-5, -5, 15, 10)
    assert box.area() == 20 * 15
    clamped = box.clamped(10, 8)
    assert clamped.as_list() == [0, 0, 10, 8]


def test_iou_known_values():
    a = BBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, BBox(20, 20, 30, 30)) == 0.0
    # overlap 5x10 = 50, union 100 + 100 - 50
    assert iou(a, BBox(5, 0, 15, 10)) == pytest.approx(50 / 150)


def test_iou_degenerate_boxes():
    point = BBox(3, 3, 3, 3)
    assert iou(point, point) == 0.0
    assert iou(point, BBox(0, 0, 10, 10)) == 0.0


def test_iou_is_symmetric_and_bounded():
    rng = random.Random(99)
    for _ in range(300):
        a = BBox(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50))
        b = BBox(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(0, 50))
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


def test_pair_similarity_averages_both_ious():
    h = BBox(0, 0, 10, 10)
    o = BBox(20, 0, 30, 10)
    assert pair_similarity((h, o), (h, o)) == 1.0
    assert pair_similarity((h, o), (h, BBox(50, 50, 60, 60))) == 0.5


def test_normalize_name_folds_case_spacing_and_underscores():
    for raw in ("Dining Table", "dining_table", "  dining   table "):
        assert normalize_name(raw) == "dining_table"
    assert normalize_name("RIDE") == "ride"


def test_vocabulary_lookup(vocab):
    assert len(vocab.objects) == 80
    assert len(vocab.verbs) == 117
    assert len(vocab.hoi_triples) == 600
    assert vocab.object_id("person") == 0
    assert vocab.object_id("Dining_Table") == vocab.object_id("dining table")
    assert vocab.object_id("unicorn") == NOT_FOUND
    assert vocab.verb_id("talk_on_phone") == vocab.verb_id("talk on phone")
    ride, bike = vocab.verb_id("ride"), vocab.object_id("bicycle")
    assert vocab.is_valid_combination(ride, bike)
    assert not vocab.is_valid_combination(vocab.verb_id("eat"), bike)
    assert vocab.hoi_category(ride, bike) != NOT_FOUND


def test_vocabulary_rejects_bad_triples():
    with pytest.warns(UserWarning), pytest.raises(ValueError):
        Vocabulary(["a"], ["x"], [(0, 0), (0, 0)], strict=False)
    with pytest.warns(UserWarning), pytest.raises(ValueError):
        Vocabulary(["a"], ["x"], [(5, 0)], strict=False)


def test_vocabulary_warns_on_noncanonical_counts():
    with pytest.warns(UserWarning):
        Vocabulary(["a"], ["x"], [(0, 0)])


def test_gt_pair_requires_verbs():
    with pytest.raises(ValueError):
        GtPair(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3), 0, frozenset())


def test_gt_image_clamps_pairs_to_bounds():
    img = GtImage(
        "x", 100, 100,
        (GtPair(BBox(-10, -10, 50, 50), BBox(60, 60, 150, 150), 1, frozenset({0})),),
    )
    assert img.pairs[0].human.as_list() == [0, 0, 50, 50]
    assert img.pairs[0].object.as_list() == [60, 60, 100, 100]


def test_box_from_values_requires_four_numbers():
    assert box_from_values([1, 2, 3, 4]) == BBox(1, 2, 3, 4)
    with pytest.raises(ValueError):
        box_from_values([1, 2, 3])
