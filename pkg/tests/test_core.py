import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chan2chan.core import (
    CausalWindow,
    Direction,
    Domain,
    DomainMismatch,
    Frame,
    IndexOutOfRange,
    MixedDimensions,
    NonContiguousIndices,
    ShapeError,
    TauTooSmall,
    TrainConfig,
    VideoSequence,
    make_causal_window,
    to_metric_space,
    to_model_space,
)

from conftest import marked_frame, marked_pair


class TestFrame:
    def test_valid(self):
        f = Frame(np.zeros((16, 16), dtype=np.float32), 3, Domain.U)
        assert f.t == 3 and f.height == 16 and f.width == 16

    def test_rejects_non_2d(self):
        with pytest.raises(ShapeError):
            Frame(np.zeros((3, 16, 16)), 0, Domain.U)

    def test_rejects_small(self):
        with pytest.raises(ShapeError):
            Frame(np.zeros((8, 8)), 0, Domain.U)

    def test_rejects_out_of_range(self):
        bad = np.zeros((16, 16))
        bad[0, 0] = 1.5
        with pytest.raises(ShapeError):
            Frame(bad, 0, Domain.U)

    def test_rejects_nan(self):
        bad = np.zeros((16, 16))
        bad[0, 0] = np.nan
        with pytest.raises(ShapeError):
            Frame(bad, 0, Domain.U)

    def test_immutable(self):
        f = Frame(np.zeros((16, 16)), 0, Domain.U)
        with pytest.raises(ValueError):
            f.pixels[0, 0] = 1.0

    def test_does_not_alias_input(self):
        src = np.zeros((16, 16), dtype=np.float32)
        f = Frame(src, 0, Domain.U)
        src[0, 0] = 0.5
        assert f.pixels[0, 0] == 0.0


class TestVideoSequence:
    def test_basic(self):
        u, _ = marked_pair(5)
        assert u.T == 5 and u.start == 0 and u.frame_shape == (16, 16)
        assert u.frame_at(2).t == 2
        with pytest.raises(IndexOutOfRange):
            u.frame_at(5)
        with pytest.raises(IndexOutOfRange):
            u.frame_at(-1)

    def test_rejects_gap(self):
        frames = (marked_frame(0, Domain.U), marked_frame(2, Domain.U))
        with pytest.raises(NonContiguousIndices):
            VideoSequence(frames, Domain.U)

    def test_rejects_domain_mix(self):
        frames = (marked_frame(0, Domain.U), marked_frame(1, Domain.V))
        with pytest.raises(DomainMismatch):
            VideoSequence(frames, Domain.U)

    def test_rejects_shape_mix(self):
        frames = (marked_frame(0, Domain.U, 16), marked_frame(1, Domain.U, 17))
        with pytest.raises(MixedDimensions):
            VideoSequence(frames, Domain.U)

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            VideoSequence((), Domain.U)

    def test_array_round_trip(self, rng):
        arr = rng.uniform(-1, 1, size=(4, 16, 16)).astype(np.float32)
        seq = VideoSequence.from_array(arr, Domain.V, "x", start=7)
        assert seq.start == 7 and seq.domain is Domain.V
        assert np.array_equal(seq.as_array(), arr)


class TestDirection:
    def test_endpoints(self):
        assert Direction.U2V.source is Domain.U
        assert Direction.U2V.target is Domain.V
        assert Direction.V2U.source is Domain.V
        assert Direction.V2U.target is Domain.U

    def test_reverse(self):
        assert Direction.U2V.reverse is Direction.V2U
        assert Direction.V2U.reverse is Direction.U2V


class TestMakeCausalWindow:
    def test_unshifted_example(self):
        u, v = marked_pair(8)
        w = make_causal_window(u, v, t=5, tau=3)
        assert [f.t for f in w.inputs] == [3, 4, 5]
        assert w.target.t == 5 and w.target.domain is Domain.V
        assert w.direction is Direction.U2V

    def test_shifted_example(self):
        u, v = marked_pair(8)
        w = make_causal_window(u, v, t=5, tau=3, shift=2)
        assert [f.t for f in w.inputs] == [1, 2, 3]
        assert w.target.t == 5

    def test_reverse_direction_shifted(self):
        u, v = marked_pair(8)
        w = make_causal_window(u, v, t=3, tau=2, shift=1, direction=Direction.V2U)
        assert [f.t for f in w.inputs] == [3, 4]
        assert w.inputs[0].domain is Domain.V
        assert w.target.t == 3 and w.target.domain is Domain.U

    def test_too_early(self):
        u, v = marked_pair(8)
        with pytest.raises(IndexOutOfRange):
            make_causal_window(u, v, t=1, tau=3)

    def test_tau_too_small(self):
        u, v = marked_pair(8)
        with pytest.raises(TauTooSmall):
            make_causal_window(u, v, t=5, tau=1)

    def test_swapped_sequences_rejected(self):
        u, v = marked_pair(8)
        with pytest.raises(DomainMismatch):
            make_causal_window(v, u, t=5, tau=3)

    def test_pure(self):
        u, v = marked_pair(8)
        w1 = make_causal_window(u, v, t=5, tau=3, shift=1)
        w2 = make_causal_window(u, v, t=5, tau=3, shift=1)
        assert [f.t for f in w1.inputs] == [f.t for f in w2.inputs]
        for a, b in zip(w1.inputs, w2.inputs):
            assert np.array_equal(a.pixels, b.pixels)
        assert np.array_equal(w1.target.pixels, w2.target.pixels)

    def test_window_counts_against_enumeration(self):
        # closed form T - tau + 1 - s holds for u->v; v->u is checked purely
        # against enumeration because the shift sign flips
        for T in range(4, 11):
            u, v = marked_pair(T)
            for tau in (2, 3, 4):
                for s in (0, 1, 2):
                    for direction in Direction:
                        count = 0
                        for t in range(T):
                            try:
                                make_causal_window(u, v, t, tau, s, direction)
                                count += 1
                            except IndexOutOfRange:
                                pass
                        if direction is Direction.U2V:
                            assert count == max(0, T - tau + 1 - s), (T, tau, s)
                        else:
                            expected = sum(
                                1 for t in range(T)
                                if 0 <= t + s - tau + 1 and t + s <= T - 1
                            )
                            assert count == expected, (T, tau, s)

    @settings(max_examples=60, deadline=None)
    @given(
        T=st.integers(4, 12),
        tau=st.integers(2, 5),
        shift=st.integers(0, 3),
        t=st.integers(0, 11),
        direction=st.sampled_from(list(Direction)),
    )
    def test_window_contract_property(self, T, tau, shift, t, direction):
        u, v = marked_pair(T)
        try:
            w = make_causal_window(u, v, t, tau, shift, direction)
        except IndexOutOfRange:
            return
        assert len(w.inputs) == tau
        assert w.target.t == t
        assert w.target.domain is direction.target
        assert w.inputs[0].domain is direction.source
        end = t - shift if direction is Direction.U2V else t + shift
        assert w.inputs[-1].t == end
        assert all(b.t == a.t + 1 for a, b in zip(w.inputs, w.inputs[1:]))


class TestCausalWindowValidation:
    def test_direct_construction_checks_alignment(self):
        u, v = marked_pair(8)
        inputs = tuple(u.frame_at(i) for i in range(2, 5))
        with pytest.raises(IndexOutOfRange):
            CausalWindow(inputs, v.frame_at(5), tau=3, shift=0)

    def test_same_domain_rejected(self):
        u, _ = marked_pair(8)
        inputs = tuple(u.frame_at(i) for i in range(3, 6))
        with pytest.raises(DomainMismatch):
            CausalWindow(inputs, u.frame_at(5), tau=3, shift=0)

    def test_wrong_arity(self):
        u, v = marked_pair(8)
        inputs = tuple(u.frame_at(i) for i in range(4, 6))
        with pytest.raises(ShapeError):
            CausalWindow(inputs, v.frame_at(5), tau=3, shift=0)


class TestTrainConfig:
    def test_published_defaults(self):
        cfg = TrainConfig()
        assert cfg.lambda_s == 100.0
        assert cfg.lambda_t == 10.0
        assert cfg.learning_rate == 2e-4
        assert cfg.batch_size == 8
        assert cfg.crop_size == 128
        assert cfg.tau == 3
        assert cfg.output_mode == "averaged"

    def test_round_trip(self):
        cfg = TrainConfig(tau=4, lambda_s=50.0, seed=9)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key_named(self):
        with pytest.raises(ValueError, match="leaning_rate"):
            TrainConfig.from_dict({"leaning_rate": 1e-3})

    def test_digest_sensitivity(self):
        a, b = TrainConfig(), TrainConfig(seed=1)
        assert a.digest() == TrainConfig().digest()
        assert a.digest() != b.digest()

    def test_validation(self):
        with pytest.raises(TauTooSmall):
            TrainConfig(tau=1)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(output_mode="median")
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


def test_space_mappings_invert(rng):
    x = rng.uniform(-1, 1, size=(5, 5))
    assert np.allclose(to_model_space(to_metric_space(x)), x, atol=1e-12)
    y = rng.uniform(0, 1, size=(5, 5))
    assert np.allclose(to_metric_space(to_model_space(y)), y, atol=1e-12)
