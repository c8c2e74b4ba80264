#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bellhalo/pipeline.hpp"

namespace bellhalo {

struct ScheduleEntry {
    RotationSetting rotation;
    std::uint32_t n_shots = 1000;
};

struct ChshConfig {
    ChshSettings settings = optimal_chsh_settings();
    std::uint32_t n_shots = 4000;
};

struct ScanConfig {
    std::vector<double> n_occ{0.02, 0.05, 0.1};
    std::uint32_t n_shots = 2000;
};

struct RabiConfig {
    double rabi_khz = 50.3;  // Omega' / 2 pi
    double amplitude = 0.85;
    double tau_max_us = 60.0;
    std::uint32_t points = 61;
    unsigned counts_per_point = 2000;
    double jitter = 0.0;
};

struct RamseyConfig {
    double visibility = 0.95;
    std::uint32_t points = 41;
    unsigned counts_per_point = 2000;
};

struct RunConfig {
    SimConfig sim;
    std::vector<ScheduleEntry> schedule;
    ChshConfig chsh;
    ScanConfig scan;
    RabiConfig rabi;
    RamseyConfig ramsey;
    std::string output_dir = "out";
    /// "csv" or "bhev".
    std::string event_format = "csv";
};

/// Angle literal: a number or a multiple/fraction of pi, e.g. "pi/2", "-3pi/4", "0.25*pi", "1.2".
double parse_angle(const std::string& text);

/// Nested YAML mapping. Unknown keys and invalid values raise ConfigError
/// naming the dotted key path. An optional top-level `preset` (ideal or
/// realistic) supplies the defaults that the other keys override.
RunConfig parse_run_config(const std::string& yaml_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace bellhalo
