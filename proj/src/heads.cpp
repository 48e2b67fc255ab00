#include "masn/heads.hpp"

#include <algorithm>
#include <cmath>

#include "masn/errors.hpp"

namespace masn {

std::int64_t round_count(Real raw, CountRange range) {
    const Real r = std::round(raw);  // half away from zero
    if (r <= static_cast<Real>(range.min)) return range.min;
    if (r >= static_cast<Real>(range.max)) return range.max;
    return static_cast<std::int64_t>(r);
}

std::size_t argmax(const std::vector<Real>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TaskOutput count_head(Var f, std::int64_t target, const nn::Linear& head, CountRange range) {
    if (head.w.cols() != 1) throw ShapeError("count_head: head must map to a single score");
    Tape& tape = *f.tape;
    Var raw = head(f);
    Var residual = ops::sub(raw, tape.constant(Tensor({1, 1}, {static_cast<Real>(target)})));
    TaskOutput out;
    out.task = TaskKind::Count;
    out.loss = ops::square(residual);
    out.scores = {raw.value()[0]};
    out.prediction = round_count(raw.value()[0], range);
    out.loss_value = out.loss.value()[0];
    return out;
}

TaskOutput open_ended_head(Var f, std::size_t target, const nn::Linear& head) {
    Var logits = head(f);
    TaskOutput out;
    out.task = TaskKind::OpenEnded;
    out.loss = ops::cross_entropy(logits, target);
    out.scores.assign(logits.value().data().begin(), logits.value().data().end());
    out.prediction = static_cast<std::int64_t>(argmax(out.scores));
    out.loss_value = out.loss.value()[0];
    return out;
}

TaskOutput multichoice_head(const std::vector<Var>& candidates, std::size_t correct, const nn::Linear& head) {
    if (candidates.size() < 2) throw ShapeError("multichoice_head: need at least two candidates");
    if (correct >= candidates.size()) throw ShapeError("multichoice_head: correct index out of range");
    if (head.w.cols() != 1) throw ShapeError("multichoice_head: head must map to a single score");
    Tape& tape = *candidates[0].tape;
    std::vector<Var> scores;
    for (Var f : candidates) scores.push_back(head(f));
    Var margin = tape.constant(Tensor({1, 1}, {1.0}));
    Var total;
    for (std::size_t n = 0; n < candidates.size(); ++n) {
        if (n == correct) continue;
        Var term = ops::relu(ops::add(margin, ops::sub(scores[n], scores[correct])));
        total = total.tape ? ops::add(total, term) : term;
    }
    TaskOutput out;
    out.task = TaskKind::MultipleChoice;
    out.loss = total;
    for (Var s : scores) out.scores.push_back(s.value()[0]);
    out.prediction = static_cast<std::int64_t>(argmax(out.scores));
    out.loss_value = out.loss.value()[0];
    return out;
}

}  // namespace masn
