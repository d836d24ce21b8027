#include "esd/model.hpp"

#include <sstream>

namespace esd {

namespace {

constexpr std::array<std::string_view, kParamCount> kNames = {
    "a1", "W", "a2", "d3", "z1", "z2", "z3", "N", "s1", "s2", "s3", "d1", "d2"};

std::string format_value(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::string_view param_name(Param p) { return kNames.at(static_cast<std::size_t>(p)); }

Param param_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return kAllParams[i];
    }
    throw InvalidInput("unknown model parameter '" + std::string(name) + "'");
}

ValidationReport validate_params(const ModelParams& params) {
    ValidationReport report;
    for (Param p : kAllParams) {
        const double v = param_value(params, p);
        if (!std::isfinite(v) || v <= 0.0) {
            report.violations.push_back(std::string(param_name(p)) + " > 0 required (got " +
                                        format_value(v) + ")");
        }
    }
    if (!(params.N < params.W)) report.violations.emplace_back("N < W required");
    if (params.s2 > 0.0 && !(params.N > params.s3 / params.s2)) {
        report.warnings.emplace_back("N > s3/s2 violated; import-threshold branch infeasible");
    }
    return report;
}

void require_valid(const ModelParams& params) {
    const auto report = validate_params(params);
    if (report.ok()) return;
    std::string msg = "invalid model parameters:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw InvalidInput(msg);
}

}  // namespace esd
