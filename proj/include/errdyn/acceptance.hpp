#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace errdyn {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    std::uint64_t digest = 0;  // hash of every number the criterion computed
    double seconds = 0.0;
};

// Runs criteria 1-11 once.
std::vector<CriterionResult> run_criteria();

// Runs the whole suite twice (the second pass backs the determinism
// criterion) and appends criterion 12.
std::vector<CriterionResult> run_acceptance();

// Prints the pass/fail table; returns 0 if all criteria passed, 1 otherwise.
int acceptance_main();

}  // namespace errdyn
