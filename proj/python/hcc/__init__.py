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

"""Neural image codec: overfitted, non-overfitted and hypernetwork-modulated coding.

Images are float64 arrays of shape (3, H, W) in [0, 1]. The ``lmbda``
arguments are the rate-distortion trade-off.
"""

from ._core import (
    BaseModel,
    CodecError,
    HyperNet,
    ImageError,
    ShapeError,
    bd_rate,
    decode,
    encode,
    hyper_encode,
    mac_count,
    no_encode,
    png_supported,
    psnr,
    read_image,
    stream_info,
    stream_rd_cost,
    synthetic_image,
    train_base,
    train_hypernet,
    write_image,
)

__all__ = [
    "BaseModel",
    "CodecError",
    "HyperNet",
    "ImageError",
    "ShapeError",
    "bd_rate",
    "decode",
    "encode",
    "hyper_encode",
    "mac_count",
    "no_encode",
    "png_supported",
    "psnr",
    "read_image",
    "stream_info",
    "stream_rd_cost",
    "synthetic_image",
    "train_base",
    "train_hypernet",
    "write_image",
]
