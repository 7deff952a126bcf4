#pragma once

// Named acceptance checks with measured values.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace envagent {

struct CheckResult {
    std::string name;
    int criterion = 0;
    bool passed = false;
    /// One-line summary of the measured values.
    std::string detail;
    /// Deterministic CSV of the measurements behind the verdict.
    std::string csv;
    double seconds = 0.0;
};

struct VerifyOptions {
    std::size_t threads = 1;
    /// Reduced instance counts; used by the reproducibility check.
    bool smoke = false;
    std::uint64_t seed = 20240611;
};

/// kernel, smoothing, snr, passk, calibration, selection, regret, lemmas,
/// refinement, reproducibility (criteria 1..10 in that order).
const std::vector<std::string>& check_names();

/// Splits a comma list; an empty filter selects every check. Unknown names
/// throw InvalidConfig listing the valid ones.
std::vector<std::string> parse_check_filter(std::string_view filter);

CheckResult run_check(std::string_view name, const VerifyOptions& options = {});

std::vector<CheckResult> run_checks(std::string_view filter, const VerifyOptions& options = {});

}  // namespace envagent
