#pragma once

#include <nlohmann/json.hpp>

#include "noir/emg.hpp"
#include "noir/signal.hpp"
#include "noir/synth.hpp"

// JSON key-value configuration for montages, filters and generator profiles.
// Missing keys keep their defaults; unknown keys are ignored.
namespace noir::config {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

json to_json(const signal::Montage& m);
signal::Montage montage_from_json(const json& j);

json to_json(const signal::FilterSpec& f);
signal::FilterSpec filter_from_json(const json& j);

json to_json(const synth::SsvepStimulus& s);
synth::SsvepStimulus ssvep_stimulus_from_json(const json& j, synth::SsvepStimulus base = {});

json to_json(const synth::MiProfile& p);
synth::MiProfile mi_profile_from_json(const json& j, synth::MiProfile base = {});

json to_json(const synth::ClenchProfile& p);
synth::ClenchProfile clench_profile_from_json(const json& j, synth::ClenchProfile base = {});

json to_json(const emg::EmgCalibration& c);
emg::EmgCalibration emg_calibration_from_json(const json& j);

}  // namespace noir::config
