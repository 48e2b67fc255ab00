#include "masn/training.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <sstream>

#include "masn/errors.hpp"
#include "masn/kernels.hpp"

namespace masn {

std::size_t TrainConfig::effective_batch_size() const {
    if (batch_size > 0) return batch_size;
    return model.task == TaskKind::MultipleChoice ? 16 : 32;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (objects_per_frame < 1) throw ConfigError("train: N must be positive");
    if (clip_norm < 0.0) throw ConfigError("train: clip norm must be >= 0");
    model.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
            {"seed", c.seed},                   {"N", c.objects_per_frame},   {"clip_norm", c.clip_norm},
            {"model", to_json(c.model)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "N") c.objects_per_frame = value.get<std::size_t>();
            else if (key == "clip_norm") c.clip_norm = value.get<double>();
            else if (key == "model") {
                nlohmann::json merged = to_json(c.model);
                merged.update(value);
                c.model = model_config_from_json(merged);
            } else throw ConfigError("unknown train config key: " + key);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("train config key '" + key + "': " + e.what());
        }
    }
    return c;
}

AdamState AdamState::zeros_like(const ParamStore& params) {
    AdamState s;
    s.m = params.make_grad_buffer();
    s.v = params.make_grad_buffer();
    return s;
}

void adam_step(ParamStore& params, const GradBuffer& grads, AdamState& state, const AdamOptions& o) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: gradients/moments not aligned with parameters");
    }
    for (std::size_t p = 0; p < grads.size(); ++p) {
        if (grads[p].shape() != params.value(p).shape()) {
            throw ShapeError("adam_step: gradient shape mismatch for " + params.path(p));
        }
        if (!grads[p].all_finite()) {
            throw NumericError("adam_step: non-finite gradient for " + params.path(p) + "; step skipped");
        }
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t p = 0; p < grads.size(); ++p) {
        Tensor& w = params.value(p);
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        const Tensor& g = grads[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
            v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            w[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
        }
    }
}

nlohmann::json to_json(const EvalMetrics& m) {
    nlohmann::json j = {{"task", to_string(m.task)}, {"n", m.n}, {"loss", m.loss}, {"accuracy", m.accuracy}};
    if (m.task == TaskKind::Count) j["mse"] = m.mse;
    j["mean_alpha"] = {{"appearance", m.mean_alpha[0]}, {"motion", m.mean_alpha[1]}, {"all", m.mean_alpha[2]}};
    return j;
}

double batch_gradients(const Model& model, const ParamStore& params, std::span<const Episode> episodes,
                       std::span<const std::size_t> batch, GradBuffer& grads, bool parallel,
                       std::vector<TaskOutput>* outputs) {
    const std::size_t n = batch.size();
    if (outputs) outputs->assign(n, TaskOutput{});
    // Per-example buffers, computed in waves to bound memory, then added to
    // `grads` strictly in batch order.
    const std::size_t wave = parallel ? std::max<std::size_t>(1, static_cast<std::size_t>(kernels::max_threads())) : 1;
    double loss_sum = 0.0;
    std::vector<GradBuffer> local(std::min(wave, std::max<std::size_t>(n, 1)));
    std::vector<double> losses(local.size());
    for (std::size_t start = 0; start < n; start += wave) {
        const std::size_t count = std::min(wave, n - start);
        std::exception_ptr error;
#pragma omp parallel for schedule(static) if (parallel && count > 1)
        for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(count); ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            try {
                local[i] = params.make_grad_buffer();
                Tape tape;
                ForwardResult r = model.forward(tape, params, episodes[batch[start + i]]);
                tape.backward(r.output.loss, local[i]);
                losses[i] = r.output.loss_value;
                if (outputs) (*outputs)[start + i] = std::move(r.output);
            } catch (...) {
#pragma omp critical(masn_batch_error)
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        for (std::size_t i = 0; i < count; ++i) {
            loss_sum += losses[i];
            for (std::size_t p = 0; p < grads.size(); ++p) grads[p].add_(local[i][p]);
        }
    }
    return loss_sum;
}

namespace {

void check_dataset(const TrainConfig& config, const Dataset& dataset) {
    if (dataset.config.task != config.model.task) {
        throw TaskMismatchError("dataset task " + to_string(dataset.config.task) + " but config task " +
                                to_string(config.model.task));
    }
    if (dataset.config.objects_per_frame != config.objects_per_frame) {
        throw ConfigError("dataset has N = " + std::to_string(dataset.config.objects_per_frame) +
                          " objects per frame but config expects N = " + std::to_string(config.objects_per_frame));
    }
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    return order;
}

std::string save_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

std::mt19937_64 load_rng(const std::string& state) {
    std::mt19937_64 rng;
    std::istringstream is(state);
    is >> rng;
    if (!is) throw FormatError("checkpoint RNG state is unreadable");
    return rng;
}

double global_norm(const GradBuffer& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g.data()) s += v * v;
    return std::sqrt(s);
}

}  // namespace

TrainResult train(const TrainConfig& config_in, const Dataset& dataset, const TrainOptions& options,
                  std::optional<Checkpoint> resume) {
    TrainConfig config = config_in;
    config.validate();
    check_dataset(config, dataset);
    adapt_to_dataset(config.model, dataset.config);

    TrainResult result;
    Checkpoint& ck = result.checkpoint;
    std::mt19937_64 rng;
    if (resume) {
        if (to_json(resume->config.model) != to_json(config.model)) {
            throw ConfigError("resume checkpoint was trained with a different model config");
        }
        ck = std::move(*resume);
        ck.config = config;
        rng = load_rng(ck.rng_state);
    } else {
        ck.config = config;
        ck.params = init_params(config.model, config.seed);
        ck.optimizer = AdamState::zeros_like(ck.params);
        ck.epoch = 0;
        rng.seed(config.seed ^ 0x5ca1ab1e5eedULL);
        ck.rng_state = save_rng(rng);
    }

    const Model model(config.model);
    const AdamOptions adam{config.learning_rate};
    const std::size_t n = dataset.episodes.size();
    const std::size_t bs = config.effective_batch_size();

    for (std::size_t epoch = ck.epoch; epoch < config.epochs; ++epoch) {
        // Restored if this epoch diverges, so the returned checkpoint is the
        // consistent end-of-epoch state it claims to be.
        const ParamStore params_at_start = ck.params;
        const AdamState optimizer_at_start = ck.optimizer;
        const std::vector<std::size_t> order = shuffled(n, rng);
        double loss_sum = 0.0, sq_err = 0.0;
        std::size_t correct = 0;
        try {
            for (std::size_t start = 0; start < n; start += bs) {
                const std::size_t count = std::min(bs, n - start);
                std::span<const std::size_t> batch(order.data() + start, count);
                GradBuffer grads = ck.params.make_grad_buffer();
                std::vector<TaskOutput> outs;
                const double batch_loss =
                    batch_gradients(model, ck.params, dataset.episodes, batch, grads, options.parallel, &outs);
                if (!std::isfinite(batch_loss)) throw NumericError("training loss is not finite");
                const double inv = 1.0 / static_cast<double>(count);
                for (auto& g : grads)
                    for (double& v : g.data()) v *= inv;
                if (config.clip_norm > 0.0) {
                    const double norm = global_norm(grads);
                    if (norm > config.clip_norm) {
                        const double s = config.clip_norm / norm;
                        for (auto& g : grads)
                            for (double& v : g.data()) v *= s;
                    }
                }
                adam_step(ck.params, grads, ck.optimizer, adam);
                loss_sum += batch_loss;
                for (std::size_t i = 0; i < count; ++i) {
                    const std::int64_t answer = dataset.episodes[batch[i]].question.answer;
                    if (outs[i].prediction == answer) ++correct;
                    const double e = static_cast<double>(outs[i].prediction - answer);
                    sq_err += e * e;
                }
            }
        } catch (const NumericError& e) {
            result.diverged = true;
            result.divergence_reason = e.what();
            ck.params = params_at_start;
            ck.optimizer = optimizer_at_start;
            ck.epoch = epoch;
            return result;
        }
        EpochMetrics m;
        m.epoch = epoch + 1;
        const double denom = n ? static_cast<double>(n) : 1.0;
        m.loss = loss_sum / denom;
        m.accuracy = static_cast<double>(correct) / denom;
        m.mse = config.model.task == TaskKind::Count ? sq_err / denom : 0.0;
        ck.epoch = epoch + 1;
        ck.rng_state = save_rng(rng);
        result.history.push_back(m);
        if (options.on_epoch) options.on_epoch(m);
    }
    return result;
}

EvalMetrics evaluate(const Model& model, const ParamStore& params, const Dataset& dataset, bool parallel) {
    if (dataset.config.task != model.config().task) {
        throw TaskMismatchError("dataset task " + to_string(dataset.config.task) + " but model task " +
                                to_string(model.config().task));
    }
    const std::size_t n = dataset.episodes.size();
    std::vector<TaskOutput> outs(n);
    std::vector<std::array<double, kBranchCount>> alphas(n);
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            Tape tape;
            ForwardResult r = model.forward(tape, params, dataset.episodes[i]);
            std::array<double, kBranchCount> a{};
            for (const auto& pass : r.passes)
                for (std::size_t b = 0; b < kBranchCount; ++b) a[b] += pass.alpha[b] / static_cast<double>(r.passes.size());
            alphas[i] = a;
            outs[i] = std::move(r.output);
        } catch (...) {
#pragma omp critical(masn_eval_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    EvalMetrics m;
    m.task = model.config().task;
    m.n = n;
    if (n == 0) return m;
    double loss = 0.0, sq = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t answer = dataset.episodes[i].question.answer;
        loss += outs[i].loss_value;
        if (outs[i].prediction == answer) ++correct;
        const double e = static_cast<double>(outs[i].prediction - answer);
        sq += e * e;
        for (std::size_t b = 0; b < kBranchCount; ++b) m.mean_alpha[b] += alphas[i][b];
    }
    const double dn = static_cast<double>(n);
    m.loss = loss / dn;
    m.accuracy = static_cast<double>(correct) / dn;
    m.mse = m.task == TaskKind::Count ? sq / dn : 0.0;
    for (std::size_t b = 0; b < kBranchCount; ++b) {
        m.mean_alpha[b] /= dn;
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (alphas[i][b] - m.mean_alpha[b]) * (alphas[i][b] - m.mean_alpha[b]);
        m.std_alpha[b] = std::sqrt(var / dn);
    }
    return m;
}

}  // namespace masn
