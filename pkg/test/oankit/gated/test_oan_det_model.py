import numpy as np
import pytest
import torch

from oankit.detector.head import DetectorConfig
from oankit.gated.oan_det_model import OANDetModel
from oankit.gated.oan_det_model import to_image_tensor
from oankit.layers.backbone import BackboneConfig
from oankit.oan.head import OANConfig
from oankit.synth.scene import GroundTruthBox


def _model(**backbone):
    torch.manual_seed(0)
    return OANDetModel(
        patch_size=32,
        num_classes=2,
        backbone_conf=BackboneConfig(stage_channels=(4, 8), **backbone),
        oan_conf=OANConfig(grid_size=4, mid_channels=8, hidden_channels=8),
        det_conf=DetectorConfig(channels=8),
    )


BOXES = [[GroundTruthBox(2, 2, 10, 12, 0)], [], [GroundTruthBox(16, 20, 30, 31, 1)]]


def test_to_image_tensor():
    rasters = [np.full((4, 4), 255, dtype=np.uint8), np.zeros((4, 4), dtype=np.uint8)]
    image = to_image_tensor(rasters)
    assert image.shape == (2, 1, 4, 4)
    assert image.dtype == torch.float32
    assert float(image[0].min()) == 1.0 and float(image[1].max()) == 0.0


def test_forward_returns_loss_and_stats():
    model = _model()
    retval = model(torch.rand(3, 1, 32, 32), BOXES)
    assert set(retval) == {"loss", "stats", "weight", "activation"}
    assert retval["loss"].dim() == 0
    assert torch.isfinite(retval["loss"])
    assert float(retval["weight"]) == 3.0
    assert retval["activation"].probs.shape == (3, 4, 4)
    stats = retval["stats"]
    expected = stats["l_box"] + stats["l_class"] + 4.0 * stats["l_oan"]
    torch.testing.assert_close(stats["loss"], expected)


def test_backward_reaches_every_parameter():
    model = _model()
    model(torch.rand(3, 1, 32, 32), BOXES)["loss"].backward()
    for name, param in model.named_parameters():
        assert param.grad is not None, name
        assert torch.isfinite(param.grad).all(), name


def test_split_inference_matches_training_path():
    model = _model().eval()
    image = torch.rand(2, 1, 32, 32)
    with torch.no_grad():
        retval = model(image, BOXES[:2])
        feats = model.features(image)
        amap = model.activation(feats)
        outputs = model.detect(image, feats)
    torch.testing.assert_close(amap.probs, retval["activation"].probs)
    assert outputs.class_logits.shape == (2, 2, 4, 4)
    assert outputs.box_deltas.shape == (2, 4, 4, 4)


@pytest.mark.parametrize("oan_tap,det_tap", [(0, -1), (-1, 0), (0, 0)])
def test_taps(oan_tap, det_tap):
    model = _model(oan_tap=oan_tap, det_tap=det_tap).eval()
    image = torch.rand(2, 1, 32, 32)
    with torch.no_grad():
        feats = model.features(image)
        assert len(feats) == model.oan_stage + 1
        outputs = model.detect(image, feats)
        full = model.backbone(image)
        expected = model.detector(full[model.det_stage])
    torch.testing.assert_close(outputs.class_logits, expected.class_logits)
    assert model.activation(feats).probs.shape == (2, 4, 4)


def test_iof_assignment():
    model = OANDetModel(
        patch_size=32,
        num_classes=2,
        backbone_conf=BackboneConfig(stage_channels=(4, 8)),
        oan_conf=OANConfig(
            grid_size=4, mid_channels=8, hidden_channels=8, assign="iof"
        ),
        det_conf=DetectorConfig(channels=8),
    )
    labels = model.assign([GroundTruthBox(0, 0, 8, 8, 0)])
    assert labels.target[0, 0] == 1
    assert labels.target.sum() == 1


def test_negative_lambda():
    with pytest.raises(ValueError):
        OANDetModel(patch_size=32, num_classes=2, lam=-1.0)
