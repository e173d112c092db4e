#pragma once

#include "specop/core.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace specop {

struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    std::string relation;  // "<=", ">=", "==", "in"
    bool pass = false;
};

struct CriterionResult {
    int id = 0;
    std::string name;
    std::vector<Check> checks;
    std::string error;  // set when the criterion aborted with an exception
    double seconds = 0.0;

    bool pass() const;
};

// Grid, partition index, lambda_max and seed for the criteria that do not pin
// them; criteria 1 and 4 use their own fixed grids.
struct AcceptanceConfig {
    double half_width = 20.0;
    int points = 1600;
    int n_index = 4;
    double lambda_max = 5000.0;
    std::uint64_t seed = 1;
};

using CriterionCallback = std::function<void(const CriterionResult&)>;

// Runs criteria 1..10 in order; `on_done` fires after each one.
std::vector<CriterionResult> run_acceptance(const AcceptanceConfig& cfg, const CriterionCallback& on_done = {});

// One line: "[PASS] 3 name: check=value<=limit, ...".
std::string summary_line(const CriterionResult& r);

} // namespace specop
