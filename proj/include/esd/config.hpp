#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "esd/experiments.hpp"
#include "esd/stability.hpp"

namespace esd {

class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct ConvergenceBlock {
    std::vector<double> dt_list = {0.02, 0.01, 0.005};
    double t_end = 5.0;
    std::size_t refinement = 8;
    std::size_t n_paths = 500;
    TestFunction phi = TestFunction::X1;
};

struct PersistenceBlock {
    PersistenceSpec spec{};
    Box4 box{Vector4d::Constant(0.1), Vector4d::Constant(10.0)};
    std::size_t grid_intervals = 10;
};

struct SensitivityBlock {
    double delta_fraction = 0.10;
    std::size_t n_paths = 200;
    Qoi qoi = Qoi::AvgDemand;
};

struct StabilityBlock {
    std::string at = "origin";  // origin | no-import | import-threshold
    Vector4d p_diag = Vector4d::Ones();
};

/// Everything a CLI run needs. Defaults reproduce the baseline calibration.
struct RunConfig {
    ModelParams model{};
    NoiseIntensities noise{};
    SimConfig sim{};
    std::size_t ensemble_paths = 200;
    ConvergenceBlock convergence{};
    double moment_p = 2.0;
    PersistenceBlock persistence{};
    SensitivityBlock sensitivity{};
    StabilityBlock stability{};
    unsigned threads = 0;
};

/// Throws ConfigError naming the offending field and constraint.
void validate_config(const RunConfig& cfg);

/// Strict parse: unknown keys are rejected, missing keys take defaults.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON text of a fully populated config (sorted keys, every field).
std::string config_to_json(const RunConfig& cfg);

/// FNV-1a 64 of the canonical JSON, excluding the thread count.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace esd
