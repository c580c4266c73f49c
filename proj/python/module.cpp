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


// Python bindings. Images cross the boundary as float64 numpy arrays of
// shape (3, H, W) with values in [0, 1]; streams and model files as bytes.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "hcc/bench.hpp"
#include "hcc/bytes.hpp"
#include "hcc/decode.hpp"
#include "hcc/image_io.hpp"
#include "hcc/metrics.hpp"

namespace py = pybind11;
using namespace hcc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != 3) throw ShapeError("expected an image array of shape (3, H, W)");
  Tensor t(Shape{3, static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(2))});
  std::memcpy(t.data().data(), a.data(), t.size() * sizeof(double));
  return t;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array a(shape);
  std::memcpy(a.mutable_data(), t.data().data(), t.size() * sizeof(double));
  return a;
}

std::vector<Tensor> to_tensors(const std::vector<Array>& images) {
  std::vector<Tensor> out;
  for (const auto& a : images) out.push_back(to_tensor(a));
  return out;
}

py::bytes to_bytes(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

EncodeMode mode_of(const std::string& name) {
  const auto m = parse_mode(name);
  if (!m) throw std::invalid_argument("mode must be one of no, hyper, overfit, warmstart");
  return *m;
}

py::dict stats_dict(const EncodeStats& s) {
  py::dict d;
  d["mode"] = static_cast<int>(s.mode);
  d["steps"] = s.steps;
  d["best_step"] = s.best_step;
  d["bpp"] = s.bpp;
  d["psnr"] = s.psnr;
  d["float_psnr"] = s.float_psnr;
  d["mse"] = s.mse;
  d["rd_cost"] = s.rd_cost;
  d["macs"] = s.macs;
  d["mac_per_pixel"] = s.mac_per_pixel;
  d["switch_used"] = s.switch_used;
  d["quant_steps"] = std::vector<int>(s.quant_steps.begin(), s.quant_steps.end());
  d["losses"] = s.losses;
  d["best_losses"] = s.best_losses;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Neural image codec core: overfitted, non-overfitted and hypernetwork-modulated coding";

  py::register_exception<CodecError>(m, "CodecError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ImageError>(m, "ImageError", PyExc_OSError);

  py::class_<BaseModel>(m, "BaseModel")
      .def_static(
          "initialize",
          [](std::size_t num_grids, double lambda, std::uint64_t seed) {
            Rng rng(seed);
            return BaseModel::initialize(Architecture{num_grids}, lambda, rng);
          },
          py::arg("num_grids") = Architecture{}.num_grids, py::arg("lmbda") = 1e-3, py::arg("seed") = 0)
      .def_static("load", &load_base_model, py::arg("path"))
      .def_static("from_bytes", [](const py::bytes& b) { return decode_base_model(from_bytes(b)); })
      .def("save", [](const BaseModel& self, const std::filesystem::path& p) { save_base_model(p, self); })
      .def("to_bytes", [](const BaseModel& self) { return to_bytes(encode_base_model(self)); })
      .def_property_readonly("num_grids", [](const BaseModel& self) { return self.arch.num_grids; })
      .def_readonly("lmbda", &BaseModel::lambda)
      .def_property_readonly("model_id", [](const BaseModel& self) { return hex(model_id(self)); })
      .def("__eq__", [](const BaseModel& a, const BaseModel& b) { return a == b; })
      .def("__repr__", [](const BaseModel& self) {
        return "<BaseModel grids=" + std::to_string(self.arch.num_grids) + " id=" + hex(model_id(self)) + ">";
      });

  py::class_<HyperNet>(m, "HyperNet")
      .def_static(
          "initialize",
          [](std::size_t num_grids, const std::string& components, std::uint64_t seed) {
            Rng rng(seed);
            return HyperNet::initialize(Architecture{num_grids}, parse_component_list(components), rng);
          },
          py::arg("num_grids") = Architecture{}.num_grids, py::arg("components") = "ups,syn,arm",
          py::arg("seed") = 0)
      .def_static("load", &load_hypernet, py::arg("path"))
      .def("save", [](const HyperNet& self, const std::filesystem::path& p) { save_hypernet(p, self); })
      .def_property_readonly("enabled", [](const HyperNet& self) {
        std::vector<std::string> out;
        for (Component c : kAllComponents)
          if (has_component(self.enabled, c)) out.emplace_back(component_name(c));
        return out;
      })
      .def("__eq__", [](const HyperNet& a, const HyperNet& b) { return a == b; });

  m.def(
      "train_base",
      [](const std::vector<Array>& images, double lambda, std::size_t steps, std::size_t batch, std::size_t patch,
         std::size_t num_grids, double lr, std::uint64_t seed) {
        const auto corpus = to_tensors(images);
        BaseTrainConfig cfg;
        cfg.steps = steps;
        cfg.batch = batch;
        cfg.patch = patch;
        cfg.arch.num_grids = num_grids;
        cfg.lr = lr;
        cfg.seed = seed;
        BaseTraining t;
        {
          py::gil_scoped_release release;
          t = train_base(corpus, lambda, cfg);
        }
        return py::make_tuple(std::move(t.model), t.losses);
      },
      py::arg("images"), py::arg("lmbda"), py::arg("steps") = 200, py::arg("batch") = 4, py::arg("patch") = 256,
      py::arg("num_grids") = Architecture{}.num_grids, py::arg("lr") = BaseTrainConfig{}.lr, py::arg("seed") = 0,
      "Trains a base model; returns (model, per-step losses).");

  m.def(
      "train_hypernet",
      [](const std::vector<Array>& images, const BaseModel& base, double lambda, std::size_t steps,
         std::size_t batch, std::size_t patch, const std::string& components, double lr, std::uint64_t seed) {
        const auto corpus = to_tensors(images);
        HyperTrainConfig cfg;
        cfg.steps = steps;
        cfg.batch = batch;
        cfg.patch = patch;
        cfg.components = parse_component_list(components);
        cfg.lr = lr;
        cfg.seed = seed;
        HyperTraining t;
        {
          py::gil_scoped_release release;
          t = train_hypernet(corpus, base, lambda, cfg);
        }
        return py::make_tuple(std::move(t.net), t.losses);
      },
      py::arg("images"), py::arg("base"), py::arg("lmbda"), py::arg("steps") = 200, py::arg("batch") = 4,
      py::arg("patch") = 256, py::arg("components") = "ups,syn,arm", py::arg("lr") = HyperTrainConfig{}.lr,
      py::arg("seed") = 0, "Trains a hypernetwork against a frozen base; returns (net, per-step losses).");

  m.def(
      "encode",
      [](const Array& image, const std::string& mode, double lambda, const BaseModel* base, const HyperNet* h,
         std::size_t steps, std::uint64_t seed) {
        const Tensor x = to_tensor(image);
        EncodeRequest req;
        req.mode = mode_of(mode);
        req.lambda = lambda;
        req.steps = steps;
        req.seed = seed;
        EncodeResult r;
        {
          py::gil_scoped_release release;
          if (req.mode == EncodeMode::kOverfit && !base) {
            OverfitConfig cfg;
            cfg.steps = steps;
            cfg.seed = seed;
            r = overfit_encode(x, lambda, cfg);
          } else {
            r = encode_image(x, req, base, h);
          }
        }
        return py::make_tuple(to_bytes(r.stream), stats_dict(r.stats));
      },
      py::arg("image"), py::arg("mode"), py::arg("lmbda"), py::arg("base") = nullptr, py::arg("hyper") = nullptr,
      py::arg("steps") = kFastSteps, py::arg("seed") = 0, "Encodes an image; returns (stream bytes, stats dict).");

  m.def(
      "no_encode", [](const Array& image, const BaseModel& base) { return to_bytes(no_encode(to_tensor(image), base)); },
      py::arg("image"), py::arg("base"));

  m.def(
      "hyper_encode",
      [](const Array& image, const BaseModel& base, const HyperNet& h, double lambda, const std::string& components) {
        HyperEncodeOptions opt;
        opt.components = parse_component_list(components);
        const HyperEncodeResult r = hyper_encode(to_tensor(image), base, h, lambda, opt);
        py::dict d;
        d["use"] = r.decision.use;
        d["cost_with"] = r.decision.cost_with;
        d["cost_without"] = r.decision.cost_without;
        return py::make_tuple(to_bytes(r.stream), d);
      },
      py::arg("image"), py::arg("base"), py::arg("hyper"), py::arg("lmbda"), py::arg("components") = "ups,syn,arm",
      "Returns (stream bytes, switch decision dict).");

  m.def(
      "decode",
      [](const py::bytes& stream, const BaseModel* base) { return to_array(decode_bitstream(from_bytes(stream), base)); },
      py::arg("stream"), py::arg("base") = nullptr, "Decodes a stream to a (3, H, W) array.");

  m.def(
      "stream_info",
      [](const py::bytes& stream) {
        const Bitstream s = read_bitstream(from_bytes(stream));
        py::dict d;
        d["mode"] = static_cast<int>(s.header.mode);
        d["width"] = s.header.width;
        d["height"] = s.header.height;
        d["num_grids"] = s.header.num_grids;
        d["base_model_id"] = hex(s.header.base_model_id);
        d["component_flags"] = s.header.component_flags;
        d["sections"] = s.sections.size();
        d["latent_bytes"] = s.latent_payload.size();
        return d;
      },
      py::arg("stream"));

  m.def(
      "stream_rd_cost",
      [](const Array& image, const py::bytes& stream, const BaseModel* base, double lambda) {
        return stream_rd_cost(to_tensor(image), from_bytes(stream), base, lambda);
      },
      py::arg("image"), py::arg("stream"), py::arg("base") = nullptr, py::arg("lmbda"));

  m.def(
      "psnr", [](const Array& x, const Array& y) { return psnr(to_tensor(x), to_tensor(y)); }, py::arg("x"),
      py::arg("y"));

  m.def(
      "bd_rate",
      [](const std::vector<std::pair<double, double>>& anchor, const std::vector<std::pair<double, double>>& test) {
        auto conv = [](const auto& v) {
          std::vector<RdPoint> out;
          for (const auto& [bpp, db] : v) out.push_back({bpp, db});
          return out;
        };
        return bd_rate(conv(anchor), conv(test));
      },
      py::arg("anchor"), py::arg("test"), "BD-rate in percent from lists of (bpp, psnr).");

  m.def(
      "mac_count",
      [](std::size_t num_grids, std::size_t height, std::size_t width, const std::string& mode, std::size_t steps) {
        const ComplexityReport r = mac_count(Architecture{num_grids}, height, width, mode_of(mode), steps);
        py::dict items;
        for (const auto& it : r.items) items[py::str(it.name)] = it.macs;
        py::dict d;
        d["items"] = items;
        d["total"] = r.total;
        d["per_pixel"] = r.per_pixel;
        return d;
      },
      py::arg("num_grids"), py::arg("height"), py::arg("width"), py::arg("mode"), py::arg("steps") = 0);

  m.def(
      "read_image", [](const std::filesystem::path& p) { return to_array(read_image(p)); }, py::arg("path"));
  m.def(
      "write_image", [](const std::filesystem::path& p, const Array& a) { write_image(p, to_tensor(a)); },
      py::arg("path"), py::arg("image"));
  m.def(
      "synthetic_image",
      [](std::size_t height, std::size_t width, std::uint64_t seed) {
        return to_array(synthetic_image(height, width, seed));
      },
      py::arg("height"), py::arg("width"), py::arg("seed") = 0);
  m.def("png_supported", &png_supported);
}
