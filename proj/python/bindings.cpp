#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ridgelab/config.hpp"
#include "ridgelab/errors.hpp"
#include "ridgelab/infoestim.hpp"
#include "ridgelab/report.hpp"
#include "ridgelab/synthdata.hpp"
#include "ridgelab/toymodel.hpp"

namespace py = pybind11;
using namespace ridgelab;

namespace {

// Rows are samples and must have unit norm (or be zero); see normalized().
double entropy(const Matrix& x, double bandwidth) {
  return info::entropy(info::gram(info::SampleMatrix(x), bandwidth));
}

double mutual_information(const Matrix& u, const Matrix& v, double bandwidth) {
  return info::mutual_information(info::SampleMatrix(u), info::SampleMatrix(v), bandwidth);
}

py::dict sample_dict(const data::ArithSample& s) {
  py::dict d;
  d["k"] = s.k;
  d["s0"] = s.s0;
  d["diff"] = s.diff;
  d["elements"] = s.elements();
  d["target"] = s.target();
  const auto [ids, target] = data::tokenize(s);
  d["tokens"] = ids;
  d["target_token"] = target;
  return d;
}

py::list generate_split(const std::string& name, const std::vector<int>& k_values, std::size_t size,
                        std::uint64_t seed, int noise_range) {
  py::list out;
  for (const auto& s : data::generate_split({name, k_values, size, seed, noise_range})) out.append(sample_dict(s));
  return out;
}

// Hidden states, deltas and logits of one batch of equal-length token lists.
py::dict trace(const model::ModelState& state, const std::vector<data::TokenSequence>& inputs) {
  const auto t = model::forward(state, inputs, {.hidden = true, .attention = false});
  py::dict d;
  d["hidden"] = t.hidden;
  d["deltas"] = t.deltas;
  d["logits"] = t.logits;
  return d;
}

config::ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                                     const std::map<std::string, std::string>& overrides) {
  auto cfg = path ? config::load(*path) : config::defaults();
  for (const auto& [k, v] : overrides) config::set(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string run_all(const std::optional<std::filesystem::path>& path,
                    const std::map<std::string, std::string>& overrides) {
  return report::run_pipeline(load_config(path, overrides)).dump(2);
}

}  // namespace

PYBIND11_MODULE(_ridgelab, m) {
  m.doc() = "Layer-wise information probes for a small residual transformer.";

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("entropy", &entropy, py::arg("samples"), py::arg("bandwidth") = info::kDefaultBandwidth,
        "Matrix-based Renyi entropy (alpha = 1, nats) of the rows of `samples`.");
  m.def("mutual_information", &mutual_information, py::arg("u"), py::arg("v"),
        py::arg("bandwidth") = info::kDefaultBandwidth);
  m.def("normalized", [](const Matrix& x) { return info::SampleMatrix::normalized(x).rows(); },
        "Rows scaled to unit norm; zero rows stay zero.");

  m.def("generate_split", &generate_split, py::arg("name"), py::arg("k_values"), py::arg("size"),
        py::arg("seed"), py::arg("noise_range") = data::kDefaultNoiseRange);
  m.def("token_name", &data::token_name);
  m.attr("VOCAB_SIZE") = data::kVocabSize;

  py::class_<model::ModelState>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return model::load_checkpoint(p); })
      .def_property_readonly("n_layers", [](const model::ModelState& s) { return s.config.n_layers; })
      .def_property_readonly("d_model", [](const model::ModelState& s) { return s.config.d_model; })
      .def_readwrite("beta", &model::ModelState::beta)
      .def("trace", &trace, py::arg("inputs"))
      .def("embed_label", &model::embed_label, py::arg("token"))
      .def("weights_hash", &model::weights_hash);

  m.def("config_keys", &config::keys);
  m.def("default_config", [] { return config::dump(config::defaults()); },
        "Every key with its default value, in the config file format.");
  m.def("run_all", &run_all, py::arg("config") = std::nullopt,
        py::arg("overrides") = std::map<std::string, std::string>{},
        py::call_guard<py::gil_scoped_release>(),
        "Runs the full pipeline and returns the manifest as JSON text.");
}
