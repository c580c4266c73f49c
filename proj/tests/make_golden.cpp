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


// Regenerates the frozen streams under tests/golden. Run only when the
// stream format changes on purpose:
//   hcc_make_golden <dir>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hcc/bytes.hpp"
#include "hcc/decode.hpp"
#include "hcc/hypernet.hpp"
#include "hcc/image_io.hpp"
#include "hcc/overfit.hpp"

using namespace hcc;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: hcc_make_golden <dir>\n";
    return 2;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);

  Rng rng(2026);
  const Architecture arch{3};
  BaseModel base = BaseModel::initialize(arch, 1e-2, rng);
  for (auto& head : base.alpha)
    for (auto& v : head[4].data()) v *= 6.0;
  save_base_model(dir / "base.hcm", base);

  // A flat image whose color the base decoder misses; a shift of the last
  // synthesis bias pays for itself.
  const Tensor image = constant_image(24, 32, 0.8, 0.3, 0.15);
  HyperNet h = HyperNet::initialize(arch, mask_of(Component::kSyn), rng);
  const std::size_t syn = component_size(Component::kSyn, arch);
  auto& bias = h.heads[index_of(Component::kSyn)][3];
  bias[syn - 3] = 0.3;
  bias[syn - 2] = -0.2;
  bias[syn - 1] = -0.35;

  const Bytes mode0 = no_encode(image, base);
  const HyperEncodeResult he = hyper_encode(image, base, h, 1e-2);
  if (!he.decision.use) {
    std::cerr << "the hypernetwork fixture did not produce a mode 1 stream\n";
    return 1;
  }
  OverfitConfig cfg;
  cfg.steps = 20;
  cfg.arch = arch;
  cfg.seed = 7;
  const EncodeResult of = overfit_encode(synthetic_image(16, 16, 2026), 1e-2, cfg);

  std::ofstream hashes(dir / "hashes.txt");
  const std::pair<const char*, const Bytes*> files[] = {{"mode0.hcc", &mode0}, {"mode1.hcc", &he.stream},
                                                         {"mode2.hcc", &of.stream}};
  for (const auto& [name, bytes] : files) {
    write_file(dir / name, *bytes);
    const Tensor decoded = decode_bitstream(*bytes, &base);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(image_hash(decoded)));
    hashes << name << " " << hex << "\n";
    std::cout << name << " " << bytes->size() << " bytes, hash " << hex << "\n";
  }
  return 0;
}
