# Copyright 2026 The hcc Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import hcc


@pytest.fixture(scope="module")
def image():
    return hcc.synthetic_image(24, 32, seed=3)


@pytest.fixture(scope="module")
def base():
    return hcc.BaseModel.initialize(num_grids=3, lmbda=1e-3, seed=1)


def test_image_array_layout(image):
    assert image.shape == (3, 24, 32)
    assert image.dtype == np.float64
    assert 0.0 <= image.min() and image.max() <= 1.0


def test_no_mode_round_trip(image, base):
    stream = hcc.no_encode(image, base)
    info = hcc.stream_info(stream)
    assert info["mode"] == 0
    assert (info["height"], info["width"]) == (24, 32)
    assert info["base_model_id"] == base.model_id
    decoded = hcc.decode(stream, base)
    assert decoded.shape == image.shape
    again, stats = hcc.encode(image, "no", 1e-3, base=base)
    assert again == stream
    assert stats["bpp"] == pytest.approx(8 * len(stream) / (24 * 32))
    assert stats["psnr"] == pytest.approx(hcc.psnr(image, decoded))


def test_zero_hypernet_is_transparent(image, base):
    h = hcc.HyperNet.initialize(num_grids=3, seed=2)
    stream, decision = hcc.hyper_encode(image, base, h, 1e-3)
    assert not decision["use"]
    assert stream == hcc.no_encode(image, base)


def test_overfit_without_base(image):
    stream, stats = hcc.encode(image, "overfit", 1e-2, steps=10, seed=4)
    assert hcc.stream_info(stream)["mode"] == 2
    assert len(stats["losses"]) == 10
    assert np.all(np.diff(stats["best_losses"]) <= 0)
    decoded = hcc.decode(stream)
    assert hcc.psnr(image, decoded) == pytest.approx(stats["psnr"])
    assert hcc.stream_rd_cost(image, stream, lmbda=1e-2) == pytest.approx(stats["rd_cost"], rel=1e-12)


def test_training_is_seeded(image):
    imgs = [hcc.synthetic_image(16, 16, seed=s) for s in range(3)]
    a, la = hcc.train_base(imgs, 1e-3, steps=2, batch=1, patch=16, num_grids=2, seed=5)
    b, lb = hcc.train_base(imgs, 1e-3, steps=2, batch=1, patch=16, num_grids=2, seed=5)
    assert a == b and la == lb and len(la) == 2
    h, lh = hcc.train_hypernet(imgs, a, 1e-3, steps=1, batch=1, patch=16, components="arm", seed=6)
    assert h.enabled == ["arm"] and len(lh) == 1


def test_model_files(tmp_path, base):
    path = tmp_path / "base.hcm"
    base.save(path)
    assert hcc.BaseModel.load(path) == base
    assert hcc.BaseModel.from_bytes(base.to_bytes()) == base


def test_metrics():
    anchor = [(0.1, 28.0), (0.25, 31.5), (0.6, 35.0), (1.4, 38.2), (2.9, 41.0)]
    test = [(r * 0.9, p) for r, p in anchor]
    assert hcc.bd_rate(anchor, test) == pytest.approx(-10.0, abs=1e-9)
    report = hcc.mac_count(4, 32, 32, "overfit", steps=0)
    assert report["total"] == 0
    assert hcc.mac_count(1, 10, 10, "no")["items"]["analysis"] == 100 * (432 + 9 * 256 + 9 * 16)


def test_errors(image, base):
    with pytest.raises(ValueError):
        hcc.decode(b"HCC1garbage", base)
    with pytest.raises(hcc.CodecError, match="bad magic"):
        hcc.stream_info(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        hcc.no_encode(np.zeros((2, 4, 4)), base)
    with pytest.raises(ValueError):
        hcc.encode(image, "sideways", 1e-3, base=base)


def test_image_files(tmp_path, image):
    path = tmp_path / "x.ppm"
    hcc.write_image(path, image)
    back = hcc.read_image(path)
    assert np.max(np.abs(back - image)) <= 0.5 / 255 + 1e-12
