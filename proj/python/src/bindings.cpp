// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The PlayItBack Authors

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "playitback/dsp.hpp"
#include "playitback/errors.hpp"
#include "playitback/gradcheck.hpp"
#include "playitback/metrics.hpp"
#include "playitback/model.hpp"
#include "playitback/slot_selector.hpp"
#include "playitback/synth.hpp"
#include "playitback/trainer.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;

namespace {

pib::AudioClip to_clip(const std::vector<double>& samples, int sample_rate) {
  pib::AudioClip c;
  c.samples = samples;
  c.sample_rate = sample_rate;
  return c;
}

py::array_t<double> to_array(const pib::MelSpectrogram& s) {
  py::array_t<double> out({s.n_mels, s.n_frames});
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

class Model {
 public:
  explicit Model(const fs::path& ckpt) : m_(pib::load_model(ckpt)) {}

  std::vector<double> infer(const std::vector<double>& samples, int sample_rate) const {
    return m_->infer(to_clip(samples, sample_rate));
  }
  std::string trace(const std::vector<double>& samples, int sample_rate) const {
    const auto t = m_->forward_all_passes(to_clip(samples, sample_rate));
    return pib::trace_to_json(t, m_->config().label_mode).dump();
  }
  std::string config() const { return nlohmann::json(m_->config()).dump(); }
  std::size_t n_passes() const { return m_->config().n_passes(); }

 private:
  std::unique_ptr<pib::PlayItBackModel> m_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PlayItBack C++ core";

  py::register_exception<pib::Error>(m, "PlayItBackError", PyExc_RuntimeError);

  m.def("load_wav", [](const fs::path& p) {
    const auto c = pib::load_wav(p);
    return py::make_tuple(c.samples, c.sample_rate);
  }, py::arg("path"));
  m.def("write_wav", [](const fs::path& p, const std::vector<double>& samples, int sample_rate) {
    pib::write_wav(p, to_clip(samples, sample_rate));
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000);

  m.def("log_mel_spectrogram", [](const std::vector<double>& samples, int sample_rate, double hop_ms,
                                  std::size_t n_mels, double win_ms, std::size_t n_fft) {
    return to_array(pib::log_mel_spectrogram(to_clip(samples, sample_rate), hop_ms, n_mels, win_ms, n_fft));
  }, py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("hop_ms") = 10.0, py::arg("n_mels") = 128,
     py::arg("win_ms") = 25.0, py::arg("n_fft") = 512);

  m.def("select_segments", [](const std::vector<double>& curve, std::size_t t_frames, double hop_ms) {
    return pib::select_segments({curve}, t_frames, hop_ms).intervals;
  }, py::arg("curve"), py::arg("t_frames"), py::arg("hop_ms"));

  m.def("d_prime", &pib::d_prime, py::arg("auc"));
  m.def("roc_auc", &pib::roc_auc, py::arg("scores"), py::arg("positive"));
  m.def("average_precision", &pib::average_precision, py::arg("scores"), py::arg("positive"));

  m.def("gen_data", [](const std::string& spec_json, const fs::path& out) {
    pib::SynthSpec s = nlohmann::json::parse(spec_json).get<pib::SynthSpec>();
    s.validate();
    pib::gen_synthetic_dataset(s, out);
  }, py::arg("spec_json"), py::arg("out"));

  m.def("train", [](const std::string& cfg_json, const fs::path& data, const fs::path& ckpt) {
    pib::TrainConfig c = nlohmann::json::parse(cfg_json).get<pib::TrainConfig>();
    c.validate();
    const auto tr = pib::load_manifest(data / "train.csv");
    pib::Dataset va;
    if (fs::exists(data / "val.csv")) va = pib::load_manifest(data / "val.csv");
    py::gil_scoped_release release;
    const auto r = pib::train(c, tr, va, ckpt);
    return r.best_val_top1;
  }, py::arg("config_json"), py::arg("data"), py::arg("ckpt"));

  m.def("evaluate", [](const fs::path& ckpt, const fs::path& manifest) {
    return pib::to_json(pib::evaluate(ckpt, pib::load_manifest(manifest))).dump();
  }, py::arg("ckpt"), py::arg("manifest"));

  m.def("gradcheck", [](bool full) {
    nlohmann::json j = pib::run_gradient_suite(full);
    return j.dump();
  }, py::arg("full") = false);

  py::class_<Model>(m, "Model")
      .def(py::init<const fs::path&>(), py::arg("ckpt"))
      .def("infer", &Model::infer, py::arg("samples"), py::arg("sample_rate") = 16000)
      .def("trace_json", &Model::trace, py::arg("samples"), py::arg("sample_rate") = 16000)
      .def("config_json", &Model::config)
      .def_property_readonly("n_passes", &Model::n_passes);
}
