#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "diagfuse/cli.hpp"
#include "diagfuse/dataset.hpp"
#include "diagfuse/diagfirst.hpp"
#include "diagfuse/errors.hpp"
#include "diagfuse/fusion.hpp"
#include "diagfuse/metrics.hpp"
#include "diagfuse/models.hpp"
#include "diagfuse/staple.hpp"

namespace py = pybind11;
using namespace diagfuse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape dims(a.shape(), a.shape() + a.ndim());
  if (dims.empty()) dims = {1};
  return Tensor(dims, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::span<const double> flat(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

Array mask_array(const Mask& m) { return to_array(m.to_tensor()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-rater optic disc/cup label fusion guided by a frozen diagnosis network.";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Sample>(m, "Sample")
      .def_readonly("id", &Sample::id)
      .def_readonly("seed", &Sample::seed)
      .def_readonly("label", &Sample::label)
      .def_readonly("true_cdr", &Sample::true_cdr)
      .def_property_readonly("image", [](const Sample& s) { return to_array(s.image); })
      .def_property_readonly("truth", [](const Sample& s) {
        return to_array(mask_input(s, MaskSource::parse("truth")));
      })
      .def_property_readonly("annotations",
                             [](const Sample& s) { return to_array(annotations_tensor(s.annotations)); })
      .def("__repr__", [](const Sample& s) {
        return "<Sample " + s.id + " label=" + std::to_string(s.label) + ">";
      });

  m.def(
      "synth_sample",
      [](std::uint64_t seed, std::size_t size, std::size_t raters, double glaucoma_frac) {
        GenConfig cfg;
        cfg.h = cfg.w = size;
        cfg.glaucoma_frac = glaucoma_frac;
        Sample s = synth_sample(seed, cfg);
        s.id = "seed" + std::to_string(seed);
        s.annotations = simulate_raters(s, default_profiles(raters));
        return s;
      },
      py::arg("seed"), py::arg("size") = 64, py::arg("raters") = 3, py::arg("glaucoma_frac") = 0.5);
  m.def("read_split", [](const std::string& dir) { return read_split(dir); }, py::arg("dir"));
  m.def(
      "degrade_mask",
      [](const Array& mask, double target_iou, std::uint64_t seed) {
        if (mask.ndim() != 2) throw ShapeError("degrade_mask: expected an h x w array");
        const Mask in = Mask::threshold(flat(mask), mask.shape(0), mask.shape(1));
        return mask_array(degrade_mask(in, target_iou, seed));
      },
      py::arg("mask"), py::arg("target_iou"), py::arg("seed"));

  m.def("normalize_expertness", [](const Array& raw) { return to_array(normalize_expertness(to_tensor(raw)).normalized); },
        py::arg("raw"));
  m.def("fuse", [](const Array& ann, const Array& raw) {
    return to_array(fuse(to_tensor(ann), normalize_expertness(to_tensor(raw))));
  }, py::arg("annotations"), py::arg("raw"));
  m.def("majority_vote", [](const Array& ann) { return to_array(majority_vote(to_tensor(ann))); },
        py::arg("annotations"));
  m.def("random_fuse", [](const Array& ann, std::uint64_t seed) {
    return to_array(random_fuse(to_tensor(ann), seed));
  }, py::arg("annotations"), py::arg("seed"));
  m.def("staple", [](const Array& ann) { return to_array(staple_fuse_annotations(to_tensor(ann))); },
        py::arg("annotations"));

  m.def("dice", [](const Array& a, const Array& b, double t) { return dice(flat(a), flat(b), t); },
        py::arg("a"), py::arg("b"), py::arg("thresh") = 0.5);
  m.def("iou", [](const Array& a, const Array& b, double t) { return iou(flat(a), flat(b), t); },
        py::arg("a"), py::arg("b"), py::arg("thresh") = 0.5);
  m.def("auc", [](const std::vector<double>& s, const std::vector<int>& l) { return auc(s, l); },
        py::arg("scores"), py::arg("labels"));
  m.def("hf_energy_ratio", [](const Array& map, double cutoff) {
    if (map.ndim() != 2) throw ShapeError("hf_energy_ratio: expected an h x w array");
    return hf_energy_ratio(flat(map), map.shape(0), map.shape(1), cutoff);
  }, py::arg("map"), py::arg("cutoff") = -1.0);
  m.def("vcdr_score", [](const Array& masks, double t) { return vcdr_score(to_tensor(masks), t); },
        py::arg("masks"), py::arg("thresh") = 0.5);

  py::class_<DiagNet>(m, "DiagNet")
      .def_static("load", [](const std::string& dir) {
        DiagNet net = load_diag_net(dir);
        net.freeze();
        return net;
      }, py::arg("dir"))
      .def_static("build", [](std::vector<std::size_t> widths, std::uint64_t seed) {
        DiagArch arch;
        arch.widths = std::move(widths);
        return build_diag_net(arch, seed);
      }, py::arg("widths") = std::vector<std::size_t>{8, 16, 32, 32}, py::arg("seed") = 0)
      .def("train", [](DiagNet& net, const std::vector<Sample>& data, const std::string& source,
                       std::size_t epochs, double lr, std::uint64_t seed) {
        net.unfreeze();
        const TrainResult r = train_diag(net, data, TrainHyper{lr, 16, epochs, seed}, MaskSource::parse(source));
        net.freeze();
        return r.loss_curve;
      }, py::arg("data"), py::arg("mask_source") = "mv", py::arg("epochs") = 20, py::arg("lr") = 1e-4,
         py::arg("seed") = 0)
      .def("forward", [](const DiagNet& net, const Array& image, const Array& masks) {
        return diag_forward(net, to_tensor(image), to_tensor(masks));
      }, py::arg("image"), py::arg("masks"))
      .def_property_readonly("parameter_count", &DiagNet::parameter_count);

  m.def(
      "optimize_diagfirst",
      [](const Sample& sample, const DiagNet& net, const std::string& kind, std::size_t steps,
         double lr, std::uint64_t seed) {
        const ParamKind k = parse_param_kind(kind);
        FusionParams p = init_params(k, sample.height(), sample.width(), sample.rater_count(), seed);
        DiagFirstHyper hyper{steps, lr, seed};
        DiagFirstResult r;
        {
          py::gil_scoped_release release;
          r = optimize_diagfirst(sample, net, std::move(p), hyper);
        }
        py::dict out;
        out["fused"] = to_array(r.fused);
        out["raw_map"] = to_array(r.raw_map);
        out["losses"] = r.trace.losses;
        out["best_step"] = r.trace.best_step;
        out["diverged"] = r.trace.diverged;
        return out;
      },
      py::arg("sample"), py::arg("net"), py::arg("kind") = "expg", py::arg("steps") = 200,
      py::arg("lr") = -1.0, py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"diagfuse"};
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
