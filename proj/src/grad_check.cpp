#include "masn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "masn/errors.hpp"

namespace masn {

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& p : paths) m = std::max(m, p.max_rel_error);
    return m;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

std::vector<std::size_t> sample_entries(std::size_t n, std::size_t max_entries) {
    std::vector<std::size_t> idx;
    if (n == 0 || max_entries == 0) return idx;
    if (n <= max_entries) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    idx.reserve(max_entries);
    for (std::size_t i = 0; i < max_entries; ++i) idx.push_back(i * n / max_entries);
    return idx;
}

GradCheckReport grad_check(const LossFn& loss, ParamStore& params, const PerturbedLossFn& numeric_loss,
                           const GradCheckOptions& options) {
    if (!(options.eps > 0.0 && options.eps <= 1e-3)) {
        throw ConfigError("grad_check: eps must lie in (0, 1e-3]");
    }
    const double first = loss(params, nullptr);
    const double second = loss(params, nullptr);
    if (std::memcmp(&first, &second, sizeof(double)) != 0) {
        throw Error("grad_check: loss is not deterministic across identical calls");
    }
    if (params.size() > 0 && params.value(0).size() > 0 && numeric_loss(0, 0, 0.0L) != numeric_loss(0, 0, 0.0L)) {
        throw Error("grad_check: numeric loss is not deterministic across identical calls");
    }

    GradBuffer analytic = params.make_grad_buffer();
    loss(params, &analytic);

    const long double eps = options.eps;
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        PathGradError entry;
        entry.path = params.path(p);
        for (std::size_t i : sample_entries(params.value(p).size(), options.max_entries)) {
            const long double plus = numeric_loss(p, i, eps);
            const long double minus = numeric_loss(p, i, -eps);
            const double numeric = static_cast<double>((plus - minus) / (2.0L * eps));
            const double err = relative_error(analytic[p][i], numeric);
            ++entry.entries_checked;
            if (err > entry.max_rel_error || entry.entries_checked == 1) {
                entry.max_rel_error = err;
                entry.worst_entry = i;
                entry.analytic = analytic[p][i];
                entry.numeric = numeric;
            }
        }
        report.paths.push_back(std::move(entry));
    }
    return report;
}

GradCheckReport grad_check(const LossFn& loss, ParamStore& params, const GradCheckOptions& options) {
    // Perturbs the store in place; the double-precision sum saved + delta is
    // what the loss actually sees.
    auto numeric = [&](std::size_t p, std::size_t i, long double delta) -> long double {
        Tensor& value = params.value(p);
        const double saved = value[i];
        value[i] = saved + static_cast<double>(delta);
        const double l = loss(params, nullptr);
        value[i] = saved;
        return l;
    };
    return grad_check(loss, params, numeric, options);
}

}  // namespace masn
