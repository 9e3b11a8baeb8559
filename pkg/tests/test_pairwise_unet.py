import numpy as np
import pytest

from linker.errors import FormatError, ShapeMismatch
from linker.pairwise_unet import (
    N_TYPES,
    TYPE_ORDER,
    PairwiseUNet,
    build_pairwise,
    load_prediction,
    prediction_record,
    write_prediction,
)
from linker.tensorcore import Tensor, backward, sum_


class TestBuildPairwise:
    def test_single_pair_is_concat(self):
        hp = Tensor(np.array([[1.0, 2.0, 3.0]]))
        hl = Tensor(np.array([[4.0, 5.0, 6.0]]))
        z = build_pairwise(hp, hl)
        assert z.shape == (1, 1, 6)
        assert z.data[0, 0].tolist() == [1, 2, 3, 4, 5, 6]

    def test_entries_match_direct_concat(self):
        rng = np.random.default_rng(0)
        hp, hl = rng.normal(size=(5, 4)), rng.normal(size=(3, 4))
        z = build_pairwise(Tensor(hp), Tensor(hl)).data
        for r, f in [(0, 0), (4, 2), (2, 1)]:
            assert np.allclose(z[r, f], np.concatenate([hp[r], hl[f]]))

    def test_swapping_residues_permutes_rows_only(self):
        rng = np.random.default_rng(1)
        hp, hl = rng.normal(size=(4, 4)), rng.normal(size=(2, 4))
        z1 = build_pairwise(Tensor(hp), Tensor(hl)).data
        hp2 = hp[[1, 0, 2, 3]]
        z2 = build_pairwise(Tensor(hp2), Tensor(hl)).data
        assert np.allclose(z2[0], z1[1])
        assert np.allclose(z2[1], z1[0])
        assert np.allclose(z2[2:], z1[2:])

    def test_width_mismatch(self):
        with pytest.raises(ShapeMismatch):
            build_pairwise(Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 5))))

    def test_gradient_flows_to_both_sides(self):
        hp = Tensor(np.random.default_rng(2).normal(size=(3, 4)), requires_grad=True)
        hl = Tensor(np.random.default_rng(3).normal(size=(2, 4)), requires_grad=True)
        backward(sum_(build_pairwise(hp, hl)))
        # each hp row appears F times, each hl row R times
        assert np.allclose(hp.grad, 2.0)
        assert np.allclose(hl.grad, 3.0)


class TestUNet:
    @pytest.mark.parametrize("r,f", [(4, 4), (5, 1), (7, 3), (16, 9), (32, 16)])
    def test_shape_law(self, r, f):
        net = PairwiseUNet(d_model=6, base=4, d_unet=4, seed=0)
        rng = np.random.default_rng(r * 100 + f)
        hp = Tensor(rng.normal(size=(r, 6)))
        hl = Tensor(rng.normal(size=(f, 6)))
        p = net.forward(hp, hl)
        assert p.shape == (r, f, N_TYPES)
        assert (p.data > 0).all() and (p.data < 1).all()

    def test_zero_input_zero_biases_zero_unet_output(self):
        net = PairwiseUNet(d_model=3, base=4, d_unet=4, seed=1)
        z = Tensor(np.zeros((6, 6, 6)))
        u = net.unet_forward(z)
        assert np.allclose(u.data, 0.0)

    def test_zero_logits_give_half(self):
        net = PairwiseUNet(d_model=3, base=4, d_unet=4, seed=2)
        u = Tensor(np.zeros((5, 3, 4)))
        for w, b in (net.head1, net.head2):
            w.data[:] = 0.0
            b.data[:] = 0.0
        p = net.predict_types(u)
        assert np.allclose(p.data, 0.5)

    def test_monotone_in_single_logit(self):
        net = PairwiseUNet(d_model=3, base=4, d_unet=4, seed=3)
        u = np.random.default_rng(4).normal(size=(4, 4, 4))
        p1 = net.predict_types(Tensor(u)).data
        net.head2[1].data[2] += 1.0   # raise bias of one type channel
        p2 = net.predict_types(Tensor(u)).data
        assert (p2[:, :, 2] > p1[:, :, 2]).all()
        others = [k for k in range(N_TYPES) if k != 2]
        assert np.allclose(p2[:, :, others], p1[:, :, others])

    def test_gradient_check(self):
        net = PairwiseUNet(d_model=2, base=2, d_unet=2, seed=5)
        rng = np.random.default_rng(6)
        hp = Tensor(rng.normal(size=(6, 2)), requires_grad=True)
        hl = Tensor(rng.normal(size=(6, 2)), requires_grad=True)

        def loss():
            p = net.forward(hp, hl)
            return sum_(p * p)

        backward(loss())
        w = net.enc1[0]
        eps = 1e-6
        for tensor, idx in ((hp, (2, 1)), (w, (1, 0, 0, 2))):
            g_analytic = tensor.grad[idx]
            tensor.data[idx] += eps
            up = loss().item()
            tensor.data[idx] -= 2 * eps
            dn = loss().item()
            tensor.data[idx] += eps
            fd = (up - dn) / (2 * eps)
            assert np.isclose(g_analytic, fd, rtol=1e-4, atol=1e-7), (idx, g_analytic, fd)


class TestPredictionFormat:
    def test_round_trip(self, tmp_path):
        probs = np.random.default_rng(7).uniform(size=(5, 3, N_TYPES))
        rec = prediction_record("prot", "lig", probs)
        path = tmp_path / "pred.json"
        write_prediction(path, rec)
        back, loaded = load_prediction(path)
        assert back["protein_id"] == "prot"
        assert back["R"] == 5 and back["F"] == 3
        assert back["type_order"] == list(TYPE_ORDER)
        assert np.allclose(loaded, probs.astype(np.float32), atol=0)

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(ShapeMismatch):
            prediction_record("p", "l", np.zeros((2, 2, 6)))

    def test_corrupt_payload_rejected(self, tmp_path):
        rec = prediction_record("p", "l", np.zeros((2, 2, N_TYPES)))
        rec["probs"] = rec["probs"][:8]
        path = tmp_path / "bad.json"
        write_prediction(path, rec)
        with pytest.raises(FormatError):
            load_prediction(path)

    def test_missing_key_rejected(self, tmp_path):
        rec = prediction_record("p", "l", np.zeros((1, 1, N_TYPES)))
        del rec["type_order"]
        path = tmp_path / "bad2.json"
        write_prediction(path, rec)
        with pytest.raises(FormatError):
            load_prediction(path)
