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


#include "hcc/bench.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hcc/decode.hpp"
#include "hcc/image_io.hpp"

namespace hcc {

std::string_view mode_name(EncodeMode m) {
  switch (m) {
    case EncodeMode::kNo: return "no";
    case EncodeMode::kHyper: return "hyper";
    case EncodeMode::kOverfit: return "overfit";
    case EncodeMode::kWarmstart: return "warmstart";
  }
  return "?";
}

std::optional<EncodeMode> parse_mode(std::string_view name) {
  for (EncodeMode m : {EncodeMode::kNo, EncodeMode::kHyper, EncodeMode::kOverfit, EncodeMode::kWarmstart}) {
    if (mode_name(m) == name) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Complexity

std::uint64_t ComplexityReport::get(std::string_view name) const {
  for (const auto& it : items)
    if (it.name == name) return it.macs;
  return 0;
}

namespace {

std::uint64_t latent_positions(std::size_t height, std::size_t width, std::size_t num_grids) {
  std::uint64_t n = 0;
  for (const auto& [h, w] : grid_shapes(height, width, num_grids)) n += h * w;
  return n;
}

}  // namespace

std::uint64_t upsampling_macs(std::size_t height, std::size_t width, std::size_t num_grids) {
  const auto shapes = grid_shapes(height, width, num_grids);
  std::uint64_t n = 0;
  // Grid i is upsampled from each of the resolutions i, i-1, ..., 1; a 4x4
  // kernel at stride 2 applies 4 taps per output pixel.
  for (std::size_t i = 1; i < num_grids; ++i)
    for (std::size_t j = 1; j <= i; ++j) n += 16 * shapes[j].first * shapes[j].second;
  return n;
}

std::uint64_t synthesis_macs(std::size_t height, std::size_t width, std::size_t num_grids) {
  const std::uint64_t per_pixel =
      kSynHidden * num_grids + kSynHidden * kSynHidden + 9 * kSynHidden * kImageChannels;
  return per_pixel * height * width;
}

std::uint64_t arm_macs(std::size_t height, std::size_t width, std::size_t num_grids) {
  const std::uint64_t per_latent = kContextSize * kArmHidden + kArmHidden * kArmHidden + kArmHidden * 2;
  return per_latent * latent_positions(height, width, num_grids);
}

std::uint64_t analysis_macs(std::size_t height, std::size_t width, std::size_t num_grids) {
  const std::uint64_t per_latent =
      9 * (kImageChannels * kAnalysisHidden + kAnalysisHidden * kAnalysisHidden + kAnalysisHidden);
  return per_latent * latent_positions(height, width, num_grids);
}

std::uint64_t backbone_macs(std::size_t height, std::size_t width) {
  std::uint64_t n = 0;
  std::size_t h = height, w = width;
  for (std::size_t s = 0; s + 1 < kBackboneChannels.size(); ++s) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    n += 9 * kBackboneChannels[s] * kBackboneChannels[s + 1] * h * w;
  }
  return n;
}

std::uint64_t head_macs(const Architecture& arch, ComponentMask components) {
  std::uint64_t n = 0;
  for (Component c : kAllComponents) {
    if (!has_component(components, c)) continue;
    n += kBackboneChannels.back() * kHeadHidden + kHeadHidden * component_size(c, arch);
  }
  return n;
}

ComplexityReport mac_count(const Architecture& arch, std::size_t height, std::size_t width, EncodeMode mode,
                           std::size_t steps, ComponentMask hyper_components) {
  ComplexityReport r;
  const std::size_t n = arch.num_grids;
  const bool uses_analysis = mode != EncodeMode::kOverfit;
  const bool uses_hypernet = mode == EncodeMode::kHyper || mode == EncodeMode::kWarmstart;
  const bool optimizes = mode == EncodeMode::kOverfit || mode == EncodeMode::kWarmstart;
  hyper_components &= kAllComponentsMask;

  if (uses_analysis) r.items.push_back({"analysis", analysis_macs(height, width, n)});
  if (uses_hypernet) {
    r.items.push_back({"hypernet.backbone", hyper_components ? backbone_macs(height, width) : 0});
    r.items.push_back({"hypernet.heads", head_macs(arch, hyper_components)});
  }
  if (optimizes) {
    const std::uint64_t k = 3 * static_cast<std::uint64_t>(steps);
    r.items.push_back({"optimize.ups", k * upsampling_macs(height, width, n)});
    r.items.push_back({"optimize.syn", k * synthesis_macs(height, width, n)});
    r.items.push_back({"optimize.arm", k * arm_macs(height, width, n)});
  }
  for (const auto& it : r.items) r.total += it.macs;
  r.per_pixel = static_cast<double>(r.total) / static_cast<double>(height * width);
  return r;
}

// ---------------------------------------------------------------------------
// Encoding

EncodeResult encode_image(const Tensor& image, const EncodeRequest& request, const BaseModel* base,
                          const HyperNet* h) {
  const bool needs_base = request.mode != EncodeMode::kOverfit;
  const bool needs_hyper = request.mode == EncodeMode::kHyper || request.mode == EncodeMode::kWarmstart;
  if (needs_base && !base) throw std::invalid_argument("mode " + std::string(mode_name(request.mode)) + " needs a base model");
  if (needs_hyper && !h) throw std::invalid_argument("mode " + std::string(mode_name(request.mode)) + " needs a hypernetwork");

  EncodeResult r;
  switch (request.mode) {
    case EncodeMode::kNo: {
      const std::uint64_t mac0 = mac_counter();
      r.stream = no_encode(image, *base);
      r.stats.macs = mac_counter() - mac0;
      break;
    }
    case EncodeMode::kHyper: {
      HyperEncodeResult he = hyper_encode(image, *base, *h, request.lambda);
      r.stream = std::move(he.stream);
      r.stats.macs = he.macs;
      r.stats.switch_used = he.decision.use;
      break;
    }
    case EncodeMode::kOverfit:
    case EncodeMode::kWarmstart: {
      OverfitConfig config;
      config.steps = request.steps;
      config.seed = request.seed;
      config.init = request.mode == EncodeMode::kOverfit ? InitMode::kRandom : InitMode::kHyper;
      if (base) config.arch = base->arch;
      return overfit_encode(image, request.lambda, config, base, h);
    }
  }
  const DecodedStream d = decode_stream(r.stream, base);
  r.recon = d.image;
  r.stats.mode = d.stream.header.mode;
  r.stats.bpp = bits_per_pixel(r.stream.size(), image.dim(1), image.dim(2));
  r.stats.mse = mse(image, r.recon);
  r.stats.psnr = psnr(image, r.recon);
  r.stats.rd_cost = rd_cost(image, r.recon, 8.0 * static_cast<double>(r.stream.size()), request.lambda);
  r.stats.mac_per_pixel = static_cast<double>(r.stats.macs) / static_cast<double>(image.dim(1) * image.dim(2));
  return r;
}

// ---------------------------------------------------------------------------
// BD-rate

namespace {

struct Curve {
  Eigen::Vector4d coeffs;  // in the centered, scaled variable t = (psnr - center) / scale
  double center = 0.0;
  double scale = 1.0;
  double lo = 0.0;
  double hi = 0.0;
};

Curve fit_curve(std::span<const RdPoint> pts, const char* which) {
  if (pts.size() < 4) {
    throw std::invalid_argument(std::string("bd_rate: ") + which + " curve needs at least 4 points, got " +
                                std::to_string(pts.size()));
  }
  std::vector<RdPoint> p(pts.begin(), pts.end());
  std::sort(p.begin(), p.end(), [](const RdPoint& a, const RdPoint& b) { return a.psnr < b.psnr; });
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i].bpp > 0.0) || !std::isfinite(p[i].bpp) || !std::isfinite(p[i].psnr)) {
      throw std::invalid_argument(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
    }
    if (i > 0 && !(p[i].psnr > p[i - 1].psnr)) {
      throw std::invalid_argument(std::string("bd_rate: ") + which + " curve PSNR values must be distinct");
    }
  }
  Curve c;
  c.lo = p.front().psnr;
  c.hi = p.back().psnr;
  c.center = 0.5 * (c.lo + c.hi);
  c.scale = std::max(0.5 * (c.hi - c.lo), 1e-12);
  Eigen::MatrixXd a(p.size(), 4);
  Eigen::VectorXd y(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = (p[i].psnr - c.center) / c.scale;
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = t;
    a(static_cast<Eigen::Index>(i), 2) = t * t;
    a(static_cast<Eigen::Index>(i), 3) = t * t * t;
    y(static_cast<Eigen::Index>(i)) = std::log10(p[i].bpp);
  }
  c.coeffs = a.colPivHouseholderQr().solve(y);
  return c;
}

// Integral of the fitted polynomial over psnr in [lo, hi].
double integrate(const Curve& c, double lo, double hi) {
  auto antiderivative = [&](double psnr) {
    const double t = (psnr - c.center) / c.scale;
    double s = 0.0, tp = t;
    for (int k = 0; k < 4; ++k) {
      s += c.coeffs(k) * tp / (k + 1);
      tp *= t;
    }
    return s * c.scale;
  };
  return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test) {
  const Curve a = fit_curve(anchor, "anchor");
  const Curve t = fit_curve(test, "test");
  const double lo = std::max(a.lo, t.lo), hi = std::min(a.hi, t.hi);
  if (!(hi > lo)) throw std::invalid_argument("bd_rate: the PSNR ranges of the two curves do not overlap");
  const double avg = (integrate(t, lo, hi) - integrate(a, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t k = s.find(sep, start);
    out.emplace_back(s.substr(start, k == std::string_view::npos ? std::string_view::npos : k - start));
    if (k == std::string_view::npos) break;
    start = k + 1;
  }
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw std::invalid_argument("csv line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

std::string format_csv(std::span<const CsvRow> rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.image + "," + fmt("%.6g", r.lambda) + "," + fmt("%.9f", r.bpp) + "," + fmt("%.6f", r.psnr) + "," +
           fmt("%.3f", r.mac_per_pixel) + "," + r.mode_used + "," + r.switch_decision + "," + fmt("%.1f", r.enc_ms) +
           "\n";
  }
  return out;
}

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw std::invalid_argument("csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected 8 fields");
    CsvRow r;
    r.image = f[0];
    r.lambda = to_double(f[1], line_no);
    r.bpp = to_double(f[2], line_no);
    r.psnr = to_double(f[3], line_no);
    r.mac_per_pixel = to_double(f[4], line_no);
    r.mode_used = f[5];
    r.switch_decision = f[6];
    r.enc_ms = to_double(f[7], line_no);
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw std::invalid_argument("csv: missing header");
  return rows;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

std::string mode_used_name(StreamMode m) {
  switch (m) {
    case StreamMode::kNonOverfitted: return "no";
    case StreamMode::kHyper: return "hyper";
    case StreamMode::kOverfitted: return "overfit";
  }
  return "?";
}

}  // namespace

std::vector<CsvRow> run_corpus(const std::filesystem::path& dir, const CorpusOptions& options,
                               std::span<const BaseModel> bases, std::span<const HyperNet> hypers) {
  if (options.lambdas.empty()) throw std::invalid_argument("run_corpus: no lambdas");
  auto pick = [&](auto span, std::size_t li, const char* what) -> decltype(&span[0]) {
    if (span.empty()) return nullptr;
    if (span.size() == 1) return &span[0];
    if (span.size() != options.lambdas.size()) {
      throw std::invalid_argument(std::string("run_corpus: ") + what + " count must be 1 or one per lambda");
    }
    return &span[li];
  };
  // Validate up front so workers only see codec errors.
  for (std::size_t li = 0; li < options.lambdas.size(); ++li) {
    pick(bases, li, "base model");
    pick(hypers, li, "hypernetwork");
  }

  const auto files = list_images(dir);
  struct Job {
    std::size_t file;
    std::size_t lambda;
  };
  std::vector<Job> jobs;
  for (std::size_t f = 0; f < files.size(); ++f)
    for (std::size_t l = 0; l < options.lambdas.size(); ++l) jobs.push_back({f, l});
  std::vector<CsvRow> rows(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs.size();) {
      try {
        const Job& j = jobs[k];
        const Tensor image = read_image(files[j.file]);
        EncodeRequest req;
        req.mode = options.mode;
        req.lambda = options.lambdas[j.lambda];
        req.steps = options.steps;
        req.seed = options.seed;
        const BaseModel* base = pick(bases, j.lambda, "base model");
        const HyperNet* h = pick(hypers, j.lambda, "hypernetwork");
        const auto t0 = std::chrono::steady_clock::now();
        const EncodeResult r = encode_image(image, req, base, h);
        const auto t1 = std::chrono::steady_clock::now();
        if (options.streams_dir) {
          write_file(*options.streams_dir / (files[j.file].stem().string() + "_" + std::to_string(j.lambda) + ".hcc"),
                     r.stream);
        }
        CsvRow& row = rows[k];
        row.image = files[j.file].filename().string();
        row.lambda = req.lambda;
        row.bpp = r.stats.bpp;
        row.psnr = r.stats.psnr;
        row.mac_per_pixel = r.stats.mac_per_pixel;
        row.mode_used = mode_used_name(r.stats.mode);
        const bool has_switch = options.mode == EncodeMode::kHyper || options.mode == EncodeMode::kWarmstart;
        row.switch_decision = has_switch ? (r.stats.switch_used ? "use" : "discard") : "none";
        row.enc_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

std::vector<RdPoint> average_curve(std::span<const CsvRow> rows) {
  std::map<double, std::pair<RdPoint, std::size_t>> acc;
  for (const auto& r : rows) {
    auto& [p, n] = acc[r.lambda];
    p.bpp += r.bpp;
    p.psnr += r.psnr;
    ++n;
  }
  std::vector<RdPoint> out;
  for (const auto& [lambda, v] : acc) {
    const double n = static_cast<double>(v.second);
    out.push_back({v.first.bpp / n, v.first.psnr / n});
  }
  std::sort(out.begin(), out.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return out;
}

std::string rd_plot_svg(std::span<const CsvRow> rows, std::string_view title) {
  constexpr double kW = 640, kH = 420, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  std::map<std::string, std::vector<CsvRow>> groups;
  for (const auto& r : rows) groups[r.mode_used].push_back(r);

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!rows.empty()) {
    x0 = y0 = 1e300;
    x1 = y1 = -1e300;
    for (const auto& r : rows) {
      x0 = std::min(x0, r.bpp), x1 = std::max(x1, r.bpp);
      y0 = std::min(y0, r.psnr), y1 = std::max(y1, r.psnr);
    }
    if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  }
  auto px = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double v) { return kH - kBottom - (v - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">" << title
     << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\">"
     << "Rate [bpp] (" << fmt("%.3g", x0) << " to " << fmt("%.3g", x1) << ")</text>\n";
  os << "<text x=\"16\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 16 " << kH / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\">PSNR [dB] (" << fmt("%.3g", y0) << " to "
     << fmt("%.3g", y1) << ")</text>\n";
  std::size_t gi = 0;
  for (const auto& [name, group] : groups) {
    const char* color = colors[gi % 5];
    for (const auto& r : group) {
      os << "<circle cx=\"" << px(r.bpp) << "\" cy=\"" << py(r.psnr) << "\" r=\"3\" fill=\"" << color
         << "\" fill-opacity=\"0.5\"/>\n";
    }
    const auto curve = average_curve(group);
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : curve) os << px(p.bpp) << "," << py(p.psnr) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 100 << "\" y=\"" << kTop + 16 * (gi + 1) << "\" fill=\"" << color
       << "\" font-family=\"sans-serif\">" << name << "</text>\n";
    ++gi;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hcc
