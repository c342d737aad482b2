#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spherecal/calibration.hpp"

namespace spherecal {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit-code contract shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunManifest {
    std::string command;
    std::string config_hash;  // FNV-1a over the resolved config bytes, hex
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& out_dir);

// Static reliability diagram: per-bin accuracy bars, identity line, shaded
// accuracy/confidence gaps, plus a confidence histogram strip.
std::string reliability_svg(const CalibrationReport& report);

int run_cli(int argc, char** argv);

}  // namespace spherecal
