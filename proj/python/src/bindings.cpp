#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "seamless/app.hpp"
#include "seamless/error.hpp"

namespace py = pybind11;
using namespace seamless;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

FloatArray from_mel(const MelSpectrogram& mel) {
  FloatArray out({mel.num_frames(), mel.num_mels()});
  std::copy(mel.values().begin(), mel.values().end(), out.mutable_data());
  return out;
}

MelSpectrogram to_mel(const FloatArray& a, int hop = 256, int win = 1024) {
  if (a.ndim() != 2) throw ShapeError("expected a [frames, mels] array");
  return MelSpectrogram(a.shape(0), a.shape(1), std::vector<float>(a.data(), a.data() + a.size()), hop, win);
}

FloatArray from_vector(const std::vector<float>& v) {
  FloatArray out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

FeatureConfig features_for(int num_mels) {
  FeatureConfig f;
  f.num_mels = num_mels;
  return f;
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "seamless core bindings";

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<PrerequisiteError> prerequisite_error(m, "PrerequisiteError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const PrerequisiteError& e) {
      py::set_error(prerequisite_error, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const InvalidArgument& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<MaskRegion>(m, "MaskRegion")
      .def_readonly("start_frame", &MaskRegion::start_frame)
      .def_readonly("end_frame", &MaskRegion::end_frame)
      .def_readonly("first_phone", &MaskRegion::first_phone)
      .def_readonly("last_phone", &MaskRegion::last_phone)
      .def("__repr__", [](const MaskRegion& r) {
        return "MaskRegion(" + std::to_string(r.start_frame) + ", " + std::to_string(r.end_frame) + ")";
      });

  py::class_<AlignedUtterance>(m, "Utterance")
      .def_property_readonly("id", [](const AlignedUtterance& u) { return u.utterance.id; })
      .def_property_readonly("speaker", [](const AlignedUtterance& u) { return u.utterance.speaker_id; })
      .def_property_readonly("text", [](const AlignedUtterance& u) { return u.utterance.text; })
      .def_readonly("phonemes", &AlignedUtterance::phonemes)
      .def_readonly("durations", &AlignedUtterance::durations)
      .def_property_readonly("words", [](const AlignedUtterance& u) {
        std::vector<std::string> out;
        for (const auto& w : u.words) out.push_back(w.text);
        return out;
      })
      .def_property_readonly("mel", [](const AlignedUtterance& u) { return from_mel(u.mel); })
      .def_property_readonly("pitch", [](const AlignedUtterance& u) { return from_vector(u.pitch); });

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("json", [](const RunConfig& c) { return to_python(to_json(c)); })
      .def_property(
          "output_dir", [](const RunConfig& c) { return c.paths.output_dir; },
          [](RunConfig& c, const std::string& v) { c.paths.output_dir = v; })
      .def_property(
          "train_steps", [](const RunConfig& c) { return c.train.steps; },
          [](RunConfig& c, int v) { c.train.steps = v; });

  m.def("load_config", &load_run_config, py::arg("path"), "Load and validate a run config file.");
  m.def(
      "config_from_json", [](const std::string& text) { return run_config_from_json(nlohmann::json::parse(text)); },
      py::arg("text"));
  m.def("config_hash", &config_hash, py::arg("config"));

  m.def(
      "compute_mel",
      [](const FloatArray& samples, int num_mels) { return from_mel(compute_mel(to_vector(samples), features_for(num_mels))); },
      py::arg("samples"), py::arg("num_mels") = 80, "Log-mel spectrogram [frames, mels] of 22.05 kHz audio.");
  m.def(
      "vocode",
      [](const FloatArray& mel, int iterations) {
        GriffinLimConfig gl;
        gl.iterations = iterations;
        const auto spec = to_mel(mel);
        return from_vector(vocode(spec, features_for(static_cast<int>(spec.num_mels())), gl));
      },
      py::arg("mel"), py::arg("iterations") = 32);
  m.def(
      "synth_corpus",
      [](std::size_t n, std::uint64_t seed, int num_mels) { return synth_corpus(n, seed, features_for(num_mels)).entries; },
      py::arg("n"), py::arg("seed") = 0, py::arg("num_mels") = 80);
  m.def(
      "sample_mask",
      [](const AlignedUtterance& u, double rate, std::uint64_t seed) {
        Rng rng(seed);
        return sample_mask_spans(u, rate, rng).regions;
      },
      py::arg("utterance"), py::arg("rate") = 0.8, py::arg("seed") = 0);
  m.def(
      "resolve_edit",
      [](const AlignedUtterance& u, const std::string& script, int frames_per_phone) {
        const auto plan = resolve_edit(u, edit_script_from_json(nlohmann::json::parse(script)),
                                       Lexicon(synthetic_lexicon()),
                                       [frames_per_phone](const std::vector<std::string>& p, int) {
                                         return std::vector<int>(p.size(), frames_per_phone);
                                       });
        return py::make_tuple(plan.edited, plan.regions.regions);
      },
      py::arg("utterance"), py::arg("script"), py::arg("frames_per_phone") = 6,
      "Resolve an edit script against the synthetic lexicon with a fixed duration per new phoneme.");
  m.def(
      "mcd",
      [](const FloatArray& ref, const FloatArray& test) { return mcd(to_mel(ref), to_mel(test)); },
      py::arg("ref"), py::arg("test"));
  m.def(
      "stoi", [](const FloatArray& ref, const FloatArray& test, int rate) { return stoi(to_vector(ref), to_vector(test), rate); },
      py::arg("ref"), py::arg("test"), py::arg("sample_rate") = 22050);

  m.def(
      "synthset", [](const RunConfig& c) { return run_synthset(c).entries.size(); }, py::arg("config"),
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "pretrain_gst",
      [](const RunConfig& c) {
        const auto r = run_pretrain_gst(c);
        return py::dict(py::arg("train_accuracy") = r.train_accuracy, py::arg("heldout_accuracy") = r.heldout_accuracy,
                        py::arg("chance") = r.chance);
      },
      py::arg("config"));
  m.def(
      "train",
      [](const RunConfig& c) {
        TrainSummary s;
        {
          py::gil_scoped_release release;
          s = run_train(c);
        }
        return py::dict(py::arg("steps") = s.steps, py::arg("total") = s.last.total, py::arg("seconds") = s.seconds);
      },
      py::arg("config"));
  m.def(
      "edit",
      [](const RunConfig& c, const std::string& utterance, const std::string& script, const std::string& out_prefix,
         std::uint64_t seed) {
        const auto out = run_edit(c, utterance, edit_script_from_json(nlohmann::json::parse(script)), out_prefix, seed);
        return py::make_tuple(from_mel(out.result.mel), out.result.plan.regions.regions);
      },
      py::arg("config"), py::arg("utterance"), py::arg("script"), py::arg("out_prefix"), py::arg("seed") = 0);
  m.def(
      "evaluate", [](const RunConfig& c, bool oracle) { return to_python(run_evaluate(c, oracle).to_json()); },
      py::arg("config"), py::arg("oracle") = false);
}
