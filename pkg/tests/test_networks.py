import numpy as np
import pytest
import torch

from chan2chan.core import ArityError, InputTooSmall, ShapeError
from chan2chan.networks import (
    PatchDiscriminator,
    TemporalPredictor,
    UNetGenerator,
    disc_cell_interval,
    disc_receptive_field,
    disc_score_map_size,
    init_weights,
)


def seeded(net, seed=0):
    init_weights(net, torch.Generator().manual_seed(seed))
    return net


class TestUNetGenerator:
    @pytest.mark.parametrize("size", [16, 17, 24, 32, 33, 48])
    @pytest.mark.parametrize("depth", [2, 3, 4])
    def test_shape_preserved(self, size, depth):
        net = seeded(UNetGenerator(1, 1, depth=depth, width=4))
        unit = 2**depth
        pad = (-size) % unit
        if pad >= size:
            with pytest.raises(ShapeError):
                net(torch.zeros(1, 1, size, size))
            return
        out = net(torch.zeros(1, 1, size, size))
        assert out.shape == (1, 1, size, size)

    def test_rectangular_input(self):
        net = seeded(UNetGenerator(1, 1, depth=3, width=4))
        out = net(torch.zeros(2, 1, 40, 56))
        assert out.shape == (2, 1, 40, 56)

    def test_pad_too_large_raises(self):
        net = UNetGenerator(1, 1, depth=7, width=2)
        with pytest.raises(ShapeError):
            net(torch.zeros(1, 1, 17, 17))

    def test_output_bounded(self):
        net = seeded(UNetGenerator(1, 1, depth=3, width=8), seed=2)
        x = torch.rand(1, 1, 32, 32) * 2 - 1
        out = net(x)
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_channel_mismatch(self):
        net = UNetGenerator(1, 1, depth=2, width=4)
        with pytest.raises(ArityError):
            net(torch.zeros(1, 2, 32, 32))
        with pytest.raises(ShapeError):
            net(torch.zeros(1, 32, 32))

    def test_deterministic_init(self):
        a = seeded(UNetGenerator(1, 1, depth=3, width=4), seed=5)
        b = seeded(UNetGenerator(1, 1, depth=3, width=4), seed=5)
        c = seeded(UNetGenerator(1, 1, depth=3, width=4), seed=6)
        for (pa, pb) in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        assert any(not torch.equal(pa, pc)
                   for pa, pc in zip(a.parameters(), c.parameters()))

    def test_backward_finite(self):
        net = seeded(UNetGenerator(1, 1, depth=2, width=4))
        x = torch.rand(1, 1, 16, 16, requires_grad=True)
        net(x).mean().backward()
        for p in net.parameters():
            assert p.grad is not None and torch.isfinite(p.grad).all()

    def test_init_distribution(self):
        net = seeded(UNetGenerator(1, 1, depth=5, width=32), seed=0)
        weights = torch.cat([
            m.weight.flatten() for m in net.modules()
            if isinstance(m, (torch.nn.Conv2d, torch.nn.ConvTranspose2d))
        ])
        assert abs(weights.std().item() - 0.02) < 0.002
        assert abs(weights.mean().item()) < 0.001
        biases = torch.cat([
            m.bias.flatten() for m in net.modules()
            if isinstance(m, (torch.nn.Conv2d, torch.nn.ConvTranspose2d))
        ])
        assert torch.all(biases == 0)


class TestTemporalPredictor:
    def test_predicts_one_frame(self):
        net = seeded(TemporalPredictor(tau=3, depth=2, width=4))
        out = net(torch.zeros(2, 2, 24, 24))
        assert out.shape == (2, 1, 24, 24)

    def test_history_arity_enforced(self):
        net = TemporalPredictor(tau=3, depth=2, width=4)
        with pytest.raises(ArityError):
            net(torch.zeros(1, 3, 24, 24))
        with pytest.raises(ArityError):
            net(torch.zeros(1, 1, 24, 24))

    def test_minimum_tau_gives_single_frame_history(self):
        net = seeded(TemporalPredictor(tau=2, depth=2, width=4))
        assert net(torch.zeros(1, 1, 16, 16)).shape == (1, 1, 16, 16)


class TestDiscriminatorGeometry:
    def test_score_map_sizes_match_forward(self):
        for n_strided, size in [(3, 128), (3, 256), (2, 64), (2, 34), (1, 16)]:
            net = seeded(PatchDiscriminator(1, width=4, n_strided=n_strided))
            out = net(torch.zeros(1, 1, size, size))
            expected = disc_score_map_size(size, n_strided)
            assert out.shape == (1, 1, expected, expected), (n_strided, size)

    def test_default_map_sizes(self):
        assert disc_score_map_size(128, 3) == 14
        assert disc_score_map_size(256, 3) == 30

    def test_receptive_field_values(self):
        assert disc_receptive_field(3) == 70
        assert disc_receptive_field(2) == 34
        assert disc_receptive_field(1) == 16

    def test_receptive_field_matches_gradient_support(self):
        # input-gradient support of one interior cell == the claimed interval
        for n_strided in (1, 2):
            net = seeded(PatchDiscriminator(1, width=4, n_strided=n_strided), seed=1)
            rf = disc_receptive_field(n_strided)
            size = 3 * rf
            x = torch.zeros(1, 1, size, size, requires_grad=True)
            out = net(x)
            cell = out.shape[-1] // 2
            out[0, 0, cell, cell].backward()
            g = x.grad[0, 0].abs()
            rows = torch.nonzero(g.sum(dim=1)).flatten()
            cols = torch.nonzero(g.sum(dim=0)).flatten()
            a, b = disc_cell_interval(cell, n_strided)
            assert rows.min() >= max(a, 0) and rows.max() <= min(b, size - 1)
            assert cols.min() >= max(a, 0) and cols.max() <= min(b, size - 1)
            # interior cell sees its full receptive field
            assert rows.max() - rows.min() + 1 == rf
            assert cols.max() - cols.min() + 1 == rf

    def test_cell_interval_width(self):
        for n_strided in (1, 2, 3):
            a, b = disc_cell_interval(5, n_strided)
            assert b - a + 1 == disc_receptive_field(n_strided)

    def test_locality_no_normalization_leakage(self):
        # perturbing a pixel outside a cell's interval must not move its score
        net = seeded(PatchDiscriminator(1, width=4, n_strided=2), seed=3)
        torch.manual_seed(0)
        x = torch.rand(1, 1, 100, 100)
        with torch.no_grad():
            base = net(x)
        cell = 2
        a, b = disc_cell_interval(cell, 2)
        far = b + 5
        bumped = x.clone()
        bumped[0, 0, far, far] += 0.5
        with torch.no_grad():
            after = net(bumped)
        assert after[0, 0, cell, cell] == base[0, 0, cell, cell]
        inside = x.clone()
        inside[0, 0, max(a, 0) + 2, max(a, 0) + 2] += 0.5
        with torch.no_grad():
            after_in = net(inside)
        assert after_in[0, 0, cell, cell] != base[0, 0, cell, cell]

    def test_scores_are_probabilities(self):
        net = seeded(PatchDiscriminator(1, width=4, n_strided=2), seed=4)
        out = net(torch.rand(1, 1, 40, 40) * 2 - 1)
        assert out.min() > 0.0 and out.max() < 1.0

    def test_input_below_receptive_field_rejected(self):
        net = PatchDiscriminator(1, width=4, n_strided=3)
        with pytest.raises(InputTooSmall):
            net(torch.zeros(1, 1, 69, 69))
        net(torch.zeros(1, 1, 70, 70))

    def test_no_norm_layers_present(self):
        net = PatchDiscriminator(1, width=8, n_strided=3)
        assert not any(
            isinstance(m, (torch.nn.InstanceNorm2d, torch.nn.BatchNorm2d,
                           torch.nn.GroupNorm, torch.nn.LayerNorm))
            for m in net.modules()
        )
