#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace swinfsr {

struct GradCaseResult {
    std::string name;
    double max_rel_err = 0;
    bool pass = false;
};

// Finite-difference verification of every differentiable block at 64-bit
// precision, tolerance 1e-4.  scope selects a module subset ("all",
// "tensor", "spectral", "swin", "ffb", "rcam", "model").  inject_fault
// adds a deliberately broken conv backward that must be reported as a
// failure (self-test of the harness).  Returns true iff all cases pass.
bool run_gradcheck_suite(const std::string& scope, bool inject_fault, std::ostream& os,
                         std::vector<GradCaseResult>* results = nullptr);

}  // namespace swinfsr
