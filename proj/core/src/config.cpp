#include "noir/config.hpp"

#include <cmath>
#include <limits>

#include "noir/error.hpp"

namespace noir::config {

namespace {

// JSON has no infinity; +inf SNR is written as the string "inf".
json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  require(j.is_array(), "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(static_cast<Eigen::Index>(j.at(r).size()) == cols, "ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const signal::Montage& m) {
  json subsets = json::object();
  for (const auto& [k, v] : m.subsets) subsets[k] = v;
  return {{"name", m.name}, {"channels", m.channels}, {"subsets", subsets}};
}

signal::Montage montage_from_json(const json& j) {
  signal::Montage m;
  m.name = j.value("name", "custom");
  m.channels = j.at("channels").get<std::vector<std::string>>();
  for (const auto& [k, v] : j.at("subsets").items()) m.subsets[k] = v.get<std::vector<std::string>>();
  m.validate();
  return m;
}

json to_json(const signal::FilterSpec& f) {
  json j{{"kind", f.kind == signal::FilterKind::notch ? "notch" : "band-pass"},
         {"order", f.order},
         {"zero_phase", f.zero_phase}};
  if (f.kind == signal::FilterKind::notch) {
    j["f_notch"] = f.f_notch;
    j["q"] = f.q;
  } else {
    j["band"] = {f.f_lo, f.f_hi};
  }
  return j;
}

signal::FilterSpec filter_from_json(const json& j) {
  signal::FilterSpec f;
  const auto kind = j.value("kind", std::string("band-pass"));
  if (kind == "notch") {
    f = signal::FilterSpec::notch();
    f.f_notch = j.value("f_notch", f.f_notch);
    f.q = j.value("q", f.q);
  } else if (kind == "band-pass" || kind == "bandpass") {
    f = signal::FilterSpec::band_pass();
    if (j.contains("band")) {
      f.f_lo = j["band"].at(0).get<double>();
      f.f_hi = j["band"].at(1).get<double>();
    }
  } else {
    throw Error("unknown filter kind '" + kind + "'");
  }
  f.order = j.value("order", f.order);
  f.zero_phase = j.value("zero_phase", f.zero_phase);
  return f;
}

json to_json(const synth::SsvepStimulus& s) {
  return {{"frequencies", s.frequencies},
          {"duration_s", s.duration_s},
          {"harmonic_weights", s.harmonic_weights},
          {"snr_db", number_or_inf(s.snr_db)}};
}

synth::SsvepStimulus ssvep_stimulus_from_json(const json& j, synth::SsvepStimulus s) {
  if (j.contains("frequencies")) s.frequencies = j["frequencies"].get<std::vector<double>>();
  s.duration_s = j.value("duration_s", s.duration_s);
  if (j.contains("harmonic_weights")) s.harmonic_weights = j["harmonic_weights"].get<std::array<double, 2>>();
  if (j.contains("snr_db")) s.snr_db = read_number(j["snr_db"]);
  return s;
}

json to_json(const synth::MiProfile& p) {
  json classes = json::array();
  for (auto c : p.classes) classes.push_back(std::string(synth::to_string(c)));
  json groups = json::object();
  for (auto c : p.classes) {
    if (c != synth::MiClass::Rest) groups[std::string(synth::to_string(c))] = p.group(c);
  }
  return {{"classes", classes},        {"epoch_s", p.epoch_s},
          {"band", p.band},            {"source_band", p.source_band},
          {"modulation_db", p.modulation_db}, {"noise_floor", p.noise_floor},
          {"groups", groups}};
}

synth::MiProfile mi_profile_from_json(const json& j, synth::MiProfile p) {
  if (j.contains("classes")) {
    p.classes.clear();
    for (const auto& c : j["classes"]) p.classes.push_back(synth::mi_class_from_string(c.get<std::string>()));
  }
  p.epoch_s = j.value("epoch_s", p.epoch_s);
  if (j.contains("band")) p.band = j["band"].get<std::array<double, 2>>();
  if (j.contains("source_band")) p.source_band = j["source_band"].get<std::array<double, 2>>();
  p.modulation_db = j.value("modulation_db", p.modulation_db);
  p.noise_floor = j.value("noise_floor", p.noise_floor);
  if (j.contains("groups")) {
    for (const auto& [k, v] : j["groups"].items()) {
      p.groups[synth::mi_class_from_string(k)] = v.get<std::vector<std::string>>();
    }
  }
  return p;
}

json to_json(const synth::ClenchProfile& p) {
  return {{"window_s", p.window_s}, {"rest_var", p.rest_var}, {"clench_var", p.clench_var}};
}

synth::ClenchProfile clench_profile_from_json(const json& j, synth::ClenchProfile p) {
  p.window_s = j.value("window_s", p.window_s);
  p.rest_var = j.value("rest_var", p.rest_var);
  p.clench_var = j.value("clench_var", p.clench_var);
  return p;
}

json to_json(const emg::EmgCalibration& c) {
  return {{"format", "noir-emg-calibration-v1"},
          {"m_rest", c.m_rest},
          {"m_clench", c.m_clench},
          {"threshold", c.threshold},
          {"overlap", c.overlap},
          {"window_s", c.window_s}};
}

emg::EmgCalibration emg_calibration_from_json(const json& j) {
  require(j.value("format", "") == "noir-emg-calibration-v1", "not an EMG calibration file");
  auto c = emg::calibrate_from_medians(j.at("m_rest").get<std::vector<double>>(),
                                       j.at("m_clench").get<std::vector<double>>(), j.value("window_s", 0.0));
  return c;
}

}  // namespace noir::config
