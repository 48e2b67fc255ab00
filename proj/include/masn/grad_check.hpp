#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "masn/param_store.hpp"

namespace masn {

// A scalar loss over a parameter store. When `grads` is non-null the
// function also runs the reverse pass and adds gradients into it.
using LossFn = std::function<double(const ParamStore& params, GradBuffer* grads)>;

struct GradCheckOptions {
    double eps = 1e-5;
    // Entries per tensor; larger tensors are sampled at a fixed stride.
    std::size_t max_entries = 64;
};

struct PathGradError {
    std::string path;
    std::size_t entries_checked = 0;
    double max_rel_error = 0.0;
    std::size_t worst_entry = 0;
    double analytic = 0.0;  // at the worst entry
    double numeric = 0.0;
};

struct GradCheckReport {
    std::vector<PathGradError> paths;

    double max_rel_error() const;
    bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

// Deterministic stride sample of at most `max_entries` indices out of [0, n).
std::vector<std::size_t> sample_entries(std::size_t n, std::size_t max_entries);

// Loss with entry `entry` of parameter `param` shifted by `delta`. Lets the
// numeric side run at a higher precision than the reverse pass.
using PerturbedLossFn = std::function<long double(std::size_t param, std::size_t entry, long double delta)>;

// Central differences against the reverse-mode gradient for every path in
// `params`. The store is perturbed in place and restored before return.
// Throws Error if two identical evaluations of the loss disagree.
GradCheckReport grad_check(const LossFn& loss, ParamStore& params, const GradCheckOptions& options = {});
// As above, with the central differences taken over `numeric_loss`.
GradCheckReport grad_check(const LossFn& loss, ParamStore& params, const PerturbedLossFn& numeric_loss,
                           const GradCheckOptions& options = {});

}  // namespace masn
