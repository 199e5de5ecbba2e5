#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "slowdown/config.hpp"
#include "slowdown/error.hpp"
#include "slowdown/pipeline.hpp"
#include "slowdown/windows.hpp"

namespace py = pybind11;
using namespace slowdown;

namespace {

using Span = std::pair<Minute, Minute>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<SlowdownEvent> to_events(const std::vector<Span>& spans,
                                     EventSource source = EventSource::kLabel) {
  std::vector<SlowdownEvent> out;
  out.reserve(spans.size());
  for (const auto& [s, e] : spans) out.push_back({s, e, source});
  return out;
}

std::vector<Span> to_spans(const std::vector<SlowdownEvent>& events) {
  std::vector<Span> out;
  out.reserve(events.size());
  for (const auto& ev : events) out.emplace_back(ev.start_min, ev.end_min);
  return out;
}

std::map<std::string, std::vector<Span>> to_span_map(const EventsBySegment& events) {
  std::map<std::string, std::vector<Span>> out;
  for (const auto& [id, list] : events) out[id] = to_spans(list);
  return out;
}

std::vector<double> to_vector(const F64Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

F64Array to_array(const std::vector<double>& v) {
  F64Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Speeds with NaN gaps become a validated, gap-filled series starting at t0.
SpeedSeries series_from_array(const F64Array& speeds, Minute t0, const std::string& segment_id) {
  RawSamples raw;
  raw.segment_id = segment_id;
  raw.speeds = to_vector(speeds);
  raw.timestamps.resize(raw.speeds.size());
  for (std::size_t i = 0; i < raw.speeds.size(); ++i) raw.timestamps[i] = t0 + static_cast<Minute>(i);
  return fill_gaps(validate_series(raw));
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["detector"] = r.detector_id;
  d["corpus"] = r.corpus_id;
  d["tolerance"] = r.tolerance;
  d["tp"] = r.tp;
  d["fn"] = r.fn;
  d["fp"] = r.fp;
  d["ptp"] = r.ptp ? py::object(py::float_(*r.ptp)) : py::object(py::none());
  return d;
}

py::dict train_report_dict(const TrainReport& r) {
  py::dict d;
  d["train_loss"] = r.train_loss;
  d["val_loss"] = r.val_loss;
  d["best_epoch"] = r.best_epoch;
  d["train_accuracy"] = r.train_accuracy;
  d["val_accuracy"] = r.val_accuracy;
  d["train_mse"] = r.train_mse;
  d["val_mse"] = r.val_mse;
  return d;
}

MatchMode parse_mode(const std::string& mode) {
  if (mode == "conjunctive") return MatchMode::kConjunctive;
  if (mode == "disjunctive") return MatchMode::kDisjunctive;
  throw py::value_error("mode must be 'conjunctive' or 'disjunctive'");
}

}  // namespace

PYBIND11_MODULE(_slowdown, m) {
  m.doc() = "Two-stage sliding-window slowdown detection";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::exception<Error>(m, "SlowdownError", PyExc_RuntimeError); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(e.what());
      exc.attr("code") = error_code_name(e.code());
      exc.attr("exit_code") = exit_code(e.code());
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.attr("WINDOW_LENGTH") = kWindowLength;

  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def(py::init([](const py::dict& values) {
             PipelineConfig cfg;
             for (const auto& [k, v] : values) {
               set_config_value(cfg, py::str(k), py::str(v));
             }
             return cfg;
           }),
           py::arg("values"))
      .def("set", [](PipelineConfig& c, const std::string& key, const py::object& value) {
             set_config_value(c, key, py::str(value));
           }, py::arg("key"), py::arg("value"))
      .def("load", [](PipelineConfig& c, const std::filesystem::path& p) { apply_config_file(c, p); })
      .def("dump", &dump_config)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def_readwrite("threads", &PipelineConfig::threads)
      .def_readwrite("out_dir", &PipelineConfig::out_dir)
      .def_static("keys", [] {
        std::vector<std::string> keys;
        for (const auto& k : config_keys()) keys.push_back(k.key);
        return keys;
      });

  m.def("run_generate", [](const PipelineConfig& cfg) {
    const auto corpus = run_generate(cfg);
    return to_span_map(corpus.events);
  }, py::arg("config"), "Write a synthetic corpus to config.out_dir; returns the labels.");

  m.def("run_train", [](const PipelineConfig& cfg) {
    TrainSummary s;
    {
      py::gil_scoped_release release;
      s = run_train(cfg);
    }
    py::dict d;
    d["windows_total"] = s.windows_total;
    d["windows_balanced"] = s.windows_balanced;
    d["train_windows"] = s.train_windows;
    d["val_windows"] = s.val_windows;
    d["detection"] = train_report_dict(s.detection);
    d["start"] = train_report_dict(s.start);
    d["end"] = train_report_dict(s.end);
    return d;
  }, py::arg("config"));

  m.def("run_detect", [](const PipelineConfig& cfg, const std::string& detector) {
    const auto kind = parse_detector_kind(detector);
    EventsBySegment events;
    {
      py::gil_scoped_release release;
      events = run_detect(cfg, kind);
    }
    return to_span_map(events);
  }, py::arg("config"), py::arg("detector") = "ml");

  m.def("run_evaluate", [](const PipelineConfig& cfg) {
    py::list out;
    for (const auto& r : run_evaluate(cfg)) out.append(report_dict(r));
    return out;
  }, py::arg("config"));

  m.def("generate_corpus", [](const PipelineConfig& cfg) {
    GenConfig gen = cfg.gen;
    gen.rng_seed = cfg.seed;
    const auto corpus = generate_corpus(gen);
    py::dict speeds;
    for (const auto& s : corpus.series) speeds[py::str(s.segment_id)] = to_array(s.speeds);
    return py::make_tuple(speeds, to_span_map(corpus.events));
  }, py::arg("config"), "In-memory corpus: ({segment: speeds}, {segment: [(start, end)]}).");

  m.def("fill_gaps", [](const F64Array& speeds) {
    SpeedSeries s;
    s.speeds = to_vector(speeds);
    s.gap_mask.resize(s.speeds.size());
    for (std::size_t i = 0; i < s.speeds.size(); ++i) {
      s.gap_mask[i] = std::isfinite(s.speeds[i]) ? 0 : 1;
      if (s.gap_mask[i]) s.speeds[i] = 0.0;
    }
    return to_array(fill_gaps(std::move(s)).speeds);
  }, py::arg("speeds"), "Linear interpolation over NaN gaps; edges repeat the nearest value.");

  m.def("normalize", [](const F64Array& speeds, double v_max) {
    NormalizationSpec spec;
    spec.v_max = v_max;
    spec.check();
    const auto v = to_vector(speeds);
    return to_array(normalize(v, spec));
  }, py::arg("speeds"), py::arg("v_max") = 100.0);

  m.def("label_window", [](Minute window_start, const std::vector<Span>& events) {
    const auto evs = to_events(events);
    const auto label = label_window(window_start, evs);
    return py::make_tuple(label.positive() ? "sd_included" : "non_sd_included",
                          label.start_target ? py::object(py::float_(*label.start_target)) : py::none(),
                          label.end_target ? py::object(py::float_(*label.end_target)) : py::none());
  }, py::arg("window_start"), py::arg("events"));

  py::class_<MlpModel>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const MlpModel& model, const std::filesystem::path& p) { save_model(model, p); })
      .def_property_readonly("dims", &MlpModel::dims)
      .def_property_readonly("head", [](const MlpModel& model) { return head_name(model.head()); })
      .def_property_readonly("parameter_count", &MlpModel::parameter_count)
      .def("predict_detection", [](const MlpModel& model, const F64Array& window) {
        const auto p = predict_detection(model, to_vector(window));
        return py::make_tuple(p.sd_included, p.non_sd_included);
      }, py::arg("window"), "(p_sd_included, p_non_sd_included) for one normalized window.")
      .def("predict_time", [](const MlpModel& model, const F64Array& window) {
        return predict_time(model, to_vector(window));
      }, py::arg("window"), "Start or end fraction in [0, 1] for one normalized window.");

  m.def("detect_ml", [](const F64Array& speeds, const MlpModel& detection, const MlpModel& start,
                        const MlpModel& end, const PipelineConfig& cfg, Minute t0) {
    const auto series = series_from_array(speeds, t0, "series");
    const MlpWindowModel model(detection, start, end);
    return to_spans(detect(series, model, cfg.detector, cfg.norm).events);
  }, py::arg("speeds"), py::arg("detection"), py::arg("start"), py::arg("end"),
     py::arg("config") = PipelineConfig{}, py::arg("t0") = 0);

  m.def("detect_rule", [](const F64Array& speeds, const PipelineConfig& cfg, Minute t0) {
    const auto series = series_from_array(speeds, t0, "series");
    return to_spans(detect_rule_based(series, cfg.rule));
  }, py::arg("speeds"), py::arg("config") = PipelineConfig{}, py::arg("t0") = 0);

  m.def("match_events", [](const std::vector<Span>& truth, const std::vector<Span>& detections,
                           Minute tolerance, const std::string& mode) {
    const auto t = to_events(truth);
    const auto d = to_events(detections);
    const auto match = match_events(t, d, tolerance, parse_mode(mode));
    py::dict out = report_dict(compute_metrics(match));
    std::vector<std::pair<Span, Span>> pairs;
    for (const auto& [a, b] : match.pairs) {
      pairs.push_back({{a.start_min, a.end_min}, {b.start_min, b.end_min}});
    }
    out["pairs"] = pairs;
    return out;
  }, py::arg("truth"), py::arg("detections"), py::arg("tolerance") = 30,
     py::arg("mode") = "conjunctive");

  m.def("tolerance_sweep", [](const std::vector<Span>& truth, const std::vector<Span>& detections,
                              std::vector<Minute> tolerances, const std::string& mode) {
    const auto t = to_events(truth);
    const auto d = to_events(detections);
    py::list out;
    for (const auto& r : tolerance_sweep(t, d, tolerances, parse_mode(mode))) out.append(report_dict(r));
    return out;
  }, py::arg("truth"), py::arg("detections"), py::arg("tolerances") = default_tolerance_grid(),
     py::arg("mode") = "conjunctive");
}
