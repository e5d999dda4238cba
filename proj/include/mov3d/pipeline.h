#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mov3d/config.h"
#include "mov3d/error.h"

namespace mov3d {

struct CommandOptions {
    std::filesystem::path out;
    bool force = false;
    std::size_t threads = 1;
};

const std::vector<std::string>& command_names();

// Runs one pipeline stage into opts.out. Returns false when the stage's
// artifact already exists and force is off.
bool run_command(std::string_view command, const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);

// 2 config, 3 missing prerequisite, 4 numeric, 5 I/O, 1 anything else.
int exit_code_for(const Error& e);

// Artifact file names inside an output directory.
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kPretrainedFile = "pretrained.vxw";
inline constexpr const char* kModelFile = "model.vxw";
inline constexpr const char* kReportJson = "report.json";
inline constexpr const char* kReportTable = "report.txt";
inline constexpr const char* kLogFile = "log.jsonl";
inline constexpr const char* kImpactWav = "impact.wav";
inline constexpr const char* kReconstruction = "reconstruction.vxg";

}  // namespace mov3d
