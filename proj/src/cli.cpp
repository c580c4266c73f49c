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


#include "hcc/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hcc/bench.hpp"
#include "hcc/bitstream.hpp"
#include "hcc/bytes.hpp"
#include "hcc/decode.hpp"
#include "hcc/hypernet.hpp"
#include "hcc/image_io.hpp"
#include "hcc/no_coolchic.hpp"
#include "hcc/overfit.hpp"

namespace hcc {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<Tensor> load_corpus(const fs::path& dir) {
  std::vector<Tensor> images;
  for (const auto& p : list_images(dir)) images.push_back(read_image(p));
  if (images.empty()) throw UsageError("--corpus " + dir.string() + " contains no .ppm/.png images");
  return images;
}

std::size_t default_patch(std::span<const Tensor> corpus, std::size_t requested) {
  if (requested != 0) return requested;
  std::size_t p = 256;
  for (const auto& img : corpus) p = std::min({p, img.dim(1), img.dim(2)});
  return p;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) throw UsageError("empty entry in list '" + s + "'");
    out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

std::string read_text(const fs::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path& p, const std::string& s) { write_file(p, Bytes(s.begin(), s.end())); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void print_losses(std::ostream& err, const std::vector<double>& losses) {
  if (losses.empty()) return;
  const std::size_t every = std::max<std::size_t>(1, losses.size() / 10);
  for (std::size_t i = 0; i < losses.size(); i += every) err << "step " << i << " loss " << losses[i] << "\n";
  err << "step " << losses.size() - 1 << " loss " << losses.back() << "\n";
}

}  // namespace

int dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Overfitted and hypernetwork-modulated neural image codec", "hcc"};
  app.require_subcommand(1);

  // train-base
  auto* tb = app.add_subcommand("train-base", "Train an analysis transform and universal decoder");
  std::string tb_corpus, tb_out;
  double tb_lambda = 0.0;
  std::size_t tb_steps = 0, tb_batch = 4, tb_patch = 0, tb_grids = 7;
  std::uint64_t tb_seed = 0;
  double tb_lr = BaseTrainConfig{}.lr;
  tb->add_option("--corpus", tb_corpus, "Directory of training images")->required();
  tb->add_option("--lambda", tb_lambda, "Rate-distortion trade-off")->required();
  tb->add_option("--steps", tb_steps, "Optimization steps")->required();
  tb->add_option("--seed", tb_seed, "Random seed");
  tb->add_option("--out", tb_out, "Output .hcm file")->required();
  tb->add_option("--batch", tb_batch, "Patches per step");
  tb->add_option("--patch", tb_patch, "Patch size (default: min(256, smallest image side))");
  tb->add_option("--grids", tb_grids, "Number of latent grids")->check(CLI::Range(1, 8));
  tb->add_option("--lr", tb_lr, "Learning rate");

  // train-hypernet
  auto* th = app.add_subcommand("train-hypernet", "Train a hypernetwork on top of a frozen base model");
  std::string th_corpus, th_base, th_out, th_components = "ups,syn,arm";
  double th_lambda = 0.0;
  std::size_t th_steps = 0, th_batch = 4, th_patch = 0;
  std::uint64_t th_seed = 0;
  double th_lr = HyperTrainConfig{}.lr;
  th->add_option("--corpus", th_corpus, "Directory of training images")->required();
  th->add_option("--base", th_base, "Base model (.hcm)")->required();
  th->add_option("--lambda", th_lambda, "Rate-distortion trade-off")->required();
  th->add_option("--steps", th_steps, "Optimization steps")->required();
  th->add_option("--seed", th_seed, "Random seed");
  th->add_option("--out", th_out, "Output .hhm file")->required();
  th->add_option("--components", th_components, "Modulated components, e.g. ups,syn,arm");
  th->add_option("--batch", th_batch, "Patches per step");
  th->add_option("--patch", th_patch, "Patch size (default: min(256, smallest image side))");
  th->add_option("--lr", th_lr, "Learning rate");

  // encode
  auto* en = app.add_subcommand("encode", "Compress an image");
  std::string en_image, en_mode, en_base, en_hyper, en_out, en_steps;
  double en_lambda = 0.0;
  std::uint64_t en_seed = 0;
  std::size_t en_grids = 7;
  en->add_option("image", en_image, "Input image (.ppm or .png)")->required();
  en->add_option("--mode", en_mode, "no | hyper | overfit | warmstart")->required();
  en->add_option("--base", en_base, "Base model (.hcm)");
  en->add_option("--hyper", en_hyper, "Hypernetwork (.hhm)");
  en->add_option("--lambda", en_lambda, "Rate-distortion trade-off")->required();
  en->add_option("--steps", en_steps, "Optimization steps: a number, fast or slow");
  en->add_option("--seed", en_seed, "Random seed");
  en->add_option("--grids", en_grids, "Latent grids for overfit mode without --base")->check(CLI::Range(1, 8));
  en->add_option("-o,--out", en_out, "Output .hcc file")->required();

  // decode
  auto* de = app.add_subcommand("decode", "Decompress a .hcc file");
  std::string de_in, de_base, de_out;
  de->add_option("stream", de_in, "Input .hcc file")->required();
  de->add_option("--base", de_base, "Base model (.hcm), needed for mode 0 and 1 streams");
  de->add_option("-o,--out", de_out, "Output image (.ppm or .png)")->required();

  // bench
  auto* be = app.add_subcommand("bench", "Encode a corpus over several lambdas and write a CSV");
  std::string be_corpus, be_mode, be_lambdas, be_base, be_hyper, be_csv, be_plot, be_streams, be_steps;
  std::uint64_t be_seed = 0;
  std::size_t be_jobs = std::max(1u, std::thread::hardware_concurrency());
  be->add_option("--corpus", be_corpus, "Directory of test images")->required();
  be->add_option("--mode", be_mode, "no | hyper | overfit | warmstart")->required();
  be->add_option("--lambdas", be_lambdas, "Comma-separated lambdas")->required();
  be->add_option("--base", be_base, "Base model(s): one, or one per lambda, comma-separated");
  be->add_option("--hyper", be_hyper, "Hypernetwork(s): one, or one per lambda, comma-separated");
  be->add_option("--csv", be_csv, "Output CSV")->required();
  be->add_option("--plot", be_plot, "Output SVG rate-distortion plot");
  be->add_option("--steps", be_steps, "Optimization steps for overfit/warmstart: a number, fast or slow");
  be->add_option("--seed", be_seed, "Random seed");
  be->add_option("--jobs", be_jobs, "Worker threads")->check(CLI::PositiveNumber);
  be->add_option("--streams", be_streams, "Directory receiving the encoded streams");

  // bdrate
  auto* bd = app.add_subcommand("bdrate", "BD-rate of one bench CSV against another");
  std::string bd_anchor, bd_test;
  bd->add_option("--anchor", bd_anchor, "Anchor CSV")->required();
  bd->add_option("--test", bd_test, "Test CSV")->required();

  // synth
  auto* sy = app.add_subcommand("synth", "Write procedural test images");
  std::string sy_out;
  std::size_t sy_count = 10, sy_height = 64, sy_width = 64;
  std::uint64_t sy_seed = 0;
  sy->add_option("--out", sy_out, "Output directory")->required();
  sy->add_option("--count", sy_count, "Number of images");
  sy->add_option("--height", sy_height, "Image height")->check(CLI::Range(1, 65535));
  sy->add_option("--width", sy_width, "Image width")->check(CLI::Range(1, 65535));
  sy->add_option("--seed", sy_seed, "Random seed");

  // info
  auto* in = app.add_subcommand("info", "Print the header of a .hcc file");
  std::string in_file;
  in->add_option("stream", in_file, "Input .hcc file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*tb) {
      const auto corpus = load_corpus(tb_corpus);
      BaseTrainConfig cfg;
      cfg.steps = tb_steps;
      cfg.batch = tb_batch;
      cfg.patch = default_patch(corpus, tb_patch);
      cfg.seed = tb_seed;
      cfg.lr = tb_lr;
      cfg.arch.num_grids = tb_grids;
      const BaseTraining t = train_base(corpus, tb_lambda, cfg);
      print_losses(err, t.losses);
      save_base_model(tb_out, t.model);
      out << "model_id=" << hex(model_id(t.model)) << "\n";
    } else if (*th) {
      const auto corpus = load_corpus(th_corpus);
      const BaseModel base = load_base_model(th_base);
      HyperTrainConfig cfg;
      cfg.steps = th_steps;
      cfg.batch = th_batch;
      cfg.patch = default_patch(corpus, th_patch);
      cfg.seed = th_seed;
      cfg.lr = th_lr;
      try {
        cfg.components = parse_component_list(th_components);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--components: ") + e.what());
      }
      const HyperTraining t = train_hypernet(corpus, base, th_lambda, cfg);
      print_losses(err, t.losses);
      save_hypernet(th_out, t.net);
    } else if (*en) {
      const auto mode = parse_mode(en_mode);
      if (!mode) throw UsageError("--mode must be one of no, hyper, overfit, warmstart");
      const bool needs_hyper = *mode == EncodeMode::kHyper || *mode == EncodeMode::kWarmstart;
      if (needs_hyper && en_hyper.empty()) throw UsageError("mode " + en_mode + " requires --hyper");
      if (*mode == EncodeMode::kWarmstart && en_steps.empty()) throw UsageError("mode warmstart requires --steps");
      if (*mode != EncodeMode::kOverfit && en_base.empty()) throw UsageError("mode " + en_mode + " requires --base");
      EncodeRequest req;
      req.mode = *mode;
      req.lambda = en_lambda;
      req.seed = en_seed;
      if (!en_steps.empty()) {
        const auto steps = parse_preset(en_steps);
        if (!steps) throw UsageError("--steps must be a number, fast or slow");
        req.steps = *steps;
      }
      const Tensor image = read_image(en_image);
      std::optional<BaseModel> base;
      std::optional<HyperNet> h;
      if (!en_base.empty()) base = load_base_model(en_base);
      if (!en_hyper.empty()) h = load_hypernet(en_hyper);
      EncodeResult r;
      if (*mode == EncodeMode::kOverfit && !base) {
        OverfitConfig cfg;
        cfg.steps = req.steps;
        cfg.seed = req.seed;
        cfg.arch.num_grids = en_grids;
        r = overfit_encode(image, req.lambda, cfg);
      } else {
        r = encode_image(image, req, base ? &*base : nullptr, h ? &*h : nullptr);
      }
      write_file(en_out, r.stream);
      const char* used[] = {"no", "hyper", "overfit"};
      out << "mode_used=" << used[static_cast<int>(r.stats.mode)] << " bytes=" << r.stream.size()
          << " bpp=" << fmt("%.6f", r.stats.bpp) << " psnr=" << fmt("%.4f", r.stats.psnr)
          << " mac_per_pixel=" << fmt("%.1f", r.stats.mac_per_pixel);
      if (needs_hyper) out << " switch=" << (r.stats.switch_used ? "use" : "discard");
      out << "\n";
    } else if (*de) {
      const Bytes bytes = read_file(de_in);
      std::optional<BaseModel> base;
      if (!de_base.empty()) base = load_base_model(de_base);
      const Tensor image = decode_bitstream(bytes, base ? &*base : nullptr);
      write_image(de_out, image);
    } else if (*be) {
      const auto mode = parse_mode(be_mode);
      if (!mode) throw UsageError("--mode must be one of no, hyper, overfit, warmstart");
      const bool needs_hyper = *mode == EncodeMode::kHyper || *mode == EncodeMode::kWarmstart;
      if (needs_hyper && be_hyper.empty()) throw UsageError("mode " + be_mode + " requires --hyper");
      if (*mode == EncodeMode::kWarmstart && be_steps.empty()) throw UsageError("mode warmstart requires --steps");
      if (*mode != EncodeMode::kOverfit && be_base.empty()) throw UsageError("mode " + be_mode + " requires --base");
      CorpusOptions opt;
      opt.mode = *mode;
      opt.seed = be_seed;
      opt.jobs = be_jobs;
      for (const auto& s : split_list(be_lambdas)) {
        try {
          opt.lambdas.push_back(std::stod(s));
        } catch (const std::exception&) {
          throw UsageError("--lambdas: '" + s + "' is not a number");
        }
      }
      if (!be_steps.empty()) {
        const auto steps = parse_preset(be_steps);
        if (!steps) throw UsageError("--steps must be a number, fast or slow");
        opt.steps = *steps;
      }
      if (!be_streams.empty()) {
        if (!fs::is_directory(be_streams)) throw UsageError("--streams " + be_streams + " is not a directory");
        opt.streams_dir = be_streams;
      }
      std::vector<BaseModel> bases;
      std::vector<HyperNet> hypers;
      if (!be_base.empty())
        for (const auto& p : split_list(be_base)) bases.push_back(load_base_model(p));
      if (!be_hyper.empty())
        for (const auto& p : split_list(be_hyper)) hypers.push_back(load_hypernet(p));
      for (std::size_t n : {bases.size(), hypers.size()}) {
        if (n > 1 && n != opt.lambdas.size()) throw UsageError("give one model, or one model per lambda");
      }
      const auto rows = run_corpus(be_corpus, opt, bases, hypers);
      write_text(be_csv, format_csv(rows));
      if (!be_plot.empty()) write_text(be_plot, rd_plot_svg(rows, "Rate-distortion, mode " + be_mode));
      if (rows.empty()) {
        err << "warning: no images found in " << be_corpus << "; wrote a header-only CSV\n";
        return kExitCodecError;
      }
    } else if (*bd) {
      const auto anchor = average_curve(parse_csv(read_text(bd_anchor)));
      const auto test = average_curve(parse_csv(read_text(bd_test)));
      double v = bd_rate(anchor, test);
      std::string s = fmt("%.2f", v);
      if (s == "-0.00") s = "0.00";
      out << s << "\n";
    } else if (*sy) {
      fs::create_directories(sy_out);
      for (std::size_t i = 0; i < sy_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "synth_%03zu.ppm", i);
        write_ppm(fs::path(sy_out) / name, synthetic_image(sy_height, sy_width, sy_seed * 1000003 + i));
      }
    } else if (*in) {
      const Bitstream s = read_bitstream(read_file(in_file));
      const auto& h = s.header;
      out << "mode=" << static_cast<int>(h.mode) << " width=" << h.width << " height=" << h.height
          << " grids=" << static_cast<int>(h.num_grids) << " base=" << hex(h.base_model_id)
          << " flags=" << static_cast<int>(h.component_flags) << " latent_bytes=" << s.latent_payload.size() << "\n";
      for (const auto& sec : s.sections) {
        out << "section component=" << static_cast<int>(sec.component_id)
            << " step_index=" << static_cast<int>(sec.quant_step_index) << " count=" << sec.count
            << " bytes=" << sec.payload.size() << "\n";
      }
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCodecError;
  }
  return kExitOk;
}

}  // namespace hcc
