import json

import numpy as np
import pytest

from promptseg import BoundingBox, PointPrompt, PromptSet, ProtocolError
from promptseg import protocol

from oracles import oracle_rle


class TestMaskCodec:
    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            h = int(rng.integers(1, 20))
            w = int(rng.integers(1, 20))
            mask = rng.random((h, w)) < rng.random()
            text = protocol.encode_mask(mask)
            assert (protocol.decode_mask(text, w, h) == mask).all()

    def test_special_masks(self):
        for mask in (
            np.zeros((3, 4), bool),
            np.ones((3, 4), bool),
            np.eye(1, dtype=bool),
        ):
            h, w = mask.shape
            text = protocol.encode_mask(mask)
            assert (protocol.decode_mask(text, w, h) == mask).all()

    def test_encoding_matches_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            mask = rng.random((5, 7)) < 0.5
            expected = " ".join(str(r) for r in oracle_rle(mask.ravel().tolist()))
            assert protocol.encode_mask(mask) == expected

    def test_all_background_is_single_run(self):
        assert protocol.encode_mask(np.zeros((2, 3), bool)) == "6"

    def test_fire_first_starts_with_zero(self):
        assert protocol.encode_mask(np.ones((2, 2), bool)) == "0 4"

    def test_decode_rejects_wrong_total(self):
        with pytest.raises(ProtocolError):
            protocol.decode_mask("3 2", 2, 3)

    def test_decode_rejects_negatives_and_junk(self):
        with pytest.raises(ProtocolError):
            protocol.decode_mask("-1 7", 2, 3)
        with pytest.raises(ProtocolError):
            protocol.decode_mask("six", 2, 3)


class TestWireFormat:
    def test_golden_hello_bytes(self):
        assert protocol.dumps(protocol.hello_message()) == protocol.GOLDEN_HELLO

    def test_segment_field_order_frozen(self):
        ps = PromptSet(
            box=BoundingBox(1, 2, 5, 6, confidence=0.5),
            points=(PointPrompt(3, 4), PointPrompt(0, 0, positive=False)),
        )
        line = protocol.dumps(protocol.segment_message("/im.png", 8, 9, ps))
        assert line == (
            b'{"type":"SEGMENT","image_path":"/im.png","width":8,"height":9,'
            b'"mode":"prompted","box":[1,2,5,6],"points":[[3,4,1],[0,0,0]],'
            b'"want_memory":true}\n'
        )

    def test_auto_segment_has_no_box_or_points(self):
        msg = protocol.segment_message("/im.png", 4, 4, PromptSet(mode="auto"))
        assert "box" not in msg and "points" not in msg
        assert msg["mode"] == "auto"

    def test_detect_message(self):
        line = protocol.dumps(protocol.detect_message("/im.png", 0.3))
        assert line == b'{"type":"DETECT","image_path":"/im.png","conf":0.3}\n'

    def test_loads_rejects_bad_lines(self):
        with pytest.raises(ProtocolError):
            protocol.loads(b"not json\n")
        with pytest.raises(ProtocolError):
            protocol.loads(b'["a","list"]\n')
        with pytest.raises(ProtocolError):
            protocol.loads(b'{"type":"NOPE"}\n')

    def test_parse_prompt_set_round_trip(self):
        original = PromptSet(
            box=BoundingBox(0, 0, 3, 3), points=(PointPrompt(1, 1),)
        )
        msg = protocol.segment_message("/x.png", 4, 4, original)
        rebuilt = protocol.parse_prompt_set(msg)
        assert rebuilt.box == BoundingBox(0, 0, 3, 3)
        assert rebuilt.points == original.points
        assert rebuilt.mode == "prompted"

    def test_parse_boxes(self):
        msg = {"type": "BOXES", "boxes": [[1, 2, 3, 4, 0.75]]}
        boxes = protocol.parse_boxes(msg)
        assert boxes == [BoundingBox(1, 2, 3, 4, confidence=0.75)]

    def test_parse_boxes_rejects_malformed(self):
        with pytest.raises(ProtocolError):
            protocol.parse_boxes({"type": "BOXES", "boxes": [[1, 2, 3]]})
        with pytest.raises(ProtocolError):
            protocol.parse_boxes({"type": "BOXES", "boxes": "nope"})

    def test_parse_mask_reply(self):
        mask = np.array([[1, 0], [0, 1]], dtype=bool)
        msg = protocol.mask_message(protocol.encode_mask(mask), 2.5, 10.0)
        parsed, infer_ms, peak = protocol.parse_mask_reply(msg, 2, 2)
        assert (parsed == mask).all()
        assert infer_ms == 2.5 and peak == 10.0

    def test_parse_mask_reply_validates(self):
        msg = protocol.mask_message("4", 1.0, 0.0)
        with pytest.raises(ProtocolError):
            protocol.parse_mask_reply(msg, 3, 3)  # wrong pixel count
        with pytest.raises(ProtocolError):
            protocol.parse_mask_reply(
                {"type": "MASK", "rle": "4", "infer_ms": -1.0, "peak_mem_mb": 0.0},
                2,
                2,
            )
        with pytest.raises(ProtocolError):
            protocol.parse_mask_reply({"type": "MASK", "rle": "4"}, 2, 2)

    def test_error_message_shape(self):
        line = protocol.dumps(protocol.error_message("bad-request", "oops"))
        assert json.loads(line) == {
            "type": "ERROR",
            "code": "bad-request",
            "message": "oops",
        }


class TestPromptSerialization:
    def test_jsonl_round_trip(self):
        sets = [
            PromptSet(mode="auto"),
            PromptSet(box=BoundingBox(0, 1, 4, 5)),
            PromptSet(points=(PointPrompt(2, 2), PointPrompt(9, 9, positive=False))),
        ]
        text = protocol.serialize_prompt_sets(sets)
        rebuilt = protocol.deserialize_prompt_sets(text)
        assert rebuilt == sets
