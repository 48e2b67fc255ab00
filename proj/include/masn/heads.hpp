#pragma once

#include <cstdint>
#include <vector>

#include "masn/autodiff.hpp"
#include "masn/features.hpp"
#include "masn/nn.hpp"

namespace masn {

struct TaskOutput {
    TaskKind task = TaskKind::OpenEnded;
    Var loss;                    // 1x1, valid while its tape lives
    Real loss_value = 0.0;
    std::vector<Real> scores;  // raw count | class logits | candidate scores
    std::int64_t prediction = 0;
};

struct CountRange {
    std::int64_t min = 1;
    std::int64_t max = 10;
};

// Round half away from zero, then clamp into `range`.
std::int64_t round_count(Real raw, CountRange range);

// raw = f w + b; loss = (raw - target)^2.
TaskOutput count_head(Var f, std::int64_t target, const nn::Linear& head, CountRange range);

// logits = f W + b; loss = -log softmax(logits)[target]; prediction = argmax.
TaskOutput open_ended_head(Var f, std::size_t target, const nn::Linear& head);

// s_i = f_i w + b; loss = sum over incorrect n of max(0, 1 + s_n - s_p).
TaskOutput multichoice_head(const std::vector<Var>& candidates, std::size_t correct, const nn::Linear& head);

std::size_t argmax(const std::vector<Real>& v);

}  // namespace masn
