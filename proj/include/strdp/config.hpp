// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "strdp/codec.hpp"
#include "strdp/denoiser.hpp"
#include "strdp/pipeline.hpp"
#include "strdp/schedule.hpp"

namespace strdp {

/// Engine-side configuration: schedule, codec, denoiser.
struct EngineSettings {
    ScheduleParams schedule;
    CodecConfig codec;
    DenoiserConfig denoiser;
    std::uint64_t denoiser_seed = 0;
    std::string weights_path; // optional container with pre-initialized weights
};

/// Job-side configuration.
struct JobSettings {
    double strength = 0.5;
    std::uint64_t seed = 0;
    TransferMode mode = TransferMode::Strdp;
    TrajectoryMode trajectory = TrajectoryMode::Iterative;
    std::string content_path;
    std::string style_path;
    bool match_colors = false;
    bool dump_latents = false;
};

struct Settings {
    EngineSettings engine;
    JobSettings job;
};

/// Parses the line-oriented `key = value` config grammar documented in
/// docs/config.md ([schedule], [codec], [denoiser], [job] sections, `#`
/// comments). Unknown sections or keys raise ConfigError naming them;
/// out-of-range values raise RangeError. Missing file raises IoError.
Settings parse_config_file(const std::string& path);

/// Applies one key assignment to the settings; shared by the file parser
/// and CLI flag overrides.
void apply_setting(Settings& s, const std::string& section, const std::string& key,
                   const std::string& value);

/// Canonical text form of the resolved settings (config-file grammar).
std::string serialize_settings(const Settings& s);

/// FNV-1a hash of the canonical form, hex encoded; recorded in run reports.
std::string config_fingerprint(const Settings& s);

TransferMode parse_transfer_mode(const std::string& v);
TrajectoryMode parse_trajectory_mode(const std::string& v);

/// Builds the engine from settings. The denoiser's latent channel count
/// always follows the codec. If weights_path is set, denoiser and toy-codec
/// weights are loaded from the container instead of the seeds.
Engine<double> make_engine(const EngineSettings& s);

} // namespace strdp
