// Copyright 2026 The hcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "hcc/metrics.hpp"

#include <cmath>
#include <cstdint>

#include "hcc/image_io.hpp"

namespace hcc {

double psnr(const Tensor& x, const Tensor& xhat) {
  check_image(x);
  if (x.shape() != xhat.shape()) throw ShapeError("psnr: " + shape_str(x.shape()) + " vs " + shape_str(xhat.shape()));
  const auto a = to_rgb8(x), b = to_rgb8(xhat);
  std::uint64_t se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    se += static_cast<std::uint64_t>(d * d);
  }
  if (se == 0) return kPsnrCap;
  const double m = static_cast<double>(se) / static_cast<double>(a.size());
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

}  // namespace hcc
