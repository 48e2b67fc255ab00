#include "masn/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "masn/errors.hpp"
#include "masn/extended_oracle.hpp"
#include "masn/heads.hpp"
#include "masn/nn.hpp"

namespace masn::harness {

GeneratorConfig tiny_generator(const TinyProfile& p) {
    GeneratorConfig g;
    g.frames = p.frames;
    g.objects_per_frame = p.objects_per_frame;
    g.feature_dim = p.feature_dim;
    g.vocab = p.vocab;
    g.task = p.task;
    g.num_choices = std::min<std::size_t>(3, g.pattern_count());
    g.count_min = 1;
    g.count_max = std::min<std::size_t>(3, p.frames * p.objects_per_frame);
    return g;
}

ModelConfig tiny_model(const TinyProfile& p) {
    ModelConfig m;
    m.d = p.d;
    m.embed_dim = p.embed_dim;
    m.glimpses = p.glimpses;
    m.variant = p.variant;
    adapt_to_dataset(m, tiny_generator(p));
    return m;
}

Episode tiny_episode(const TinyProfile& p) {
    if (p.question_len < 1) throw ConfigError("tiny profile: question length must be at least 1");
    const GeneratorConfig g = tiny_generator(p);
    Episode ep = generate_episode(g, p.seed);
    std::mt19937_64 rng(p.seed ^ 0x7a11ULL);
    auto& tokens = ep.question.tokens;
    if (tokens.size() > p.question_len) tokens.resize(p.question_len);
    while (tokens.size() < p.question_len) tokens.push_back(static_cast<std::uint32_t>(rng() % g.vocab));
    return ep;
}

namespace {

LossFn with_bug(LossFn inner, bool inject_bug) {
    if (!inject_bug) return inner;
    return [inner](const ParamStore& params, GradBuffer* grads) {
        if (!grads) return inner(params, nullptr);
        GradBuffer tmp = params.make_grad_buffer();
        const double loss = inner(params, &tmp);
        for (std::size_t i = 0; i < tmp.size(); ++i) {
            for (std::size_t k = 0; k < tmp[i].size(); ++k) (*grads)[i][k] += 2.0 * tmp[i][k];
        }
        return loss;
    };
}

}  // namespace

GradCheckReport gradcheck_model(const TinyProfile& p, const GradCheckOptions& options, bool inject_bug,
                                NumericPrecision precision) {
    const Model model(tiny_model(p));
    const Episode episode = tiny_episode(p);
    ParamStore params = init_params(model.config(), p.seed);
    LossFn loss = [&](const ParamStore& ps, GradBuffer* grads) { return model.loss(ps, episode, grads); };
    if (precision == NumericPrecision::Double) return grad_check(with_bug(loss, inject_bug), params, options);

    std::vector<masn_extended::ParamData> data;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& v = params.value(i);
        data.push_back({params.path(i), v.shape(), std::vector<double>(v.data().begin(), v.data().end())});
    }
    masn_extended::ModelLossOracle oracle(to_json(model.config()),
                                          encode_episodes(Dataset{tiny_generator(p), {episode}}), data);
    PerturbedLossFn numeric = [&](std::size_t param, std::size_t entry, long double delta) {
        return oracle.loss(param, entry, delta);
    };
    return grad_check(with_bug(loss, inject_bug), params, numeric, options);
}

GradCheckReport gradcheck_head_only(const TinyProfile& p, const GradCheckOptions& options, bool inject_bug) {
    ParamStore params;
    nn::Initializer init(p.seed);
    nn::Linear::add(params, "head", p.d, 1, init);
    const Tensor f = init.normal(1, p.d, 1.0);
    const std::int64_t target = 3;
    LossFn loss = [&](const ParamStore& ps, GradBuffer* grads) {
        Tape tape;
        const nn::Linear head = nn::Linear::bind(tape, ps, "head");
        TaskOutput out = count_head(tape.constant(f), target, head, CountRange{});
        if (grads) tape.backward(out.loss, *grads);
        return out.loss_value;
    };
    return grad_check(with_bug(loss, inject_bug), params, options);
}

std::string format_gradcheck(const GradCheckReport& report, double tolerance) {
    std::size_t width = 4;
    for (const auto& e : report.paths) width = std::max(width, e.path.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width)) << "path" << "  entries  max_rel_error  status\n";
    for (const auto& e : report.paths) {
        os << std::left << std::setw(static_cast<int>(width)) << e.path << "  " << std::right << std::setw(7)
           << e.entries_checked << "  " << std::scientific << std::setprecision(3) << std::setw(13)
           << e.max_rel_error << "  " << (e.max_rel_error < tolerance ? "ok" : "FAIL") << "\n"
           << std::defaultfloat;
    }
    os << "max relative error " << std::scientific << std::setprecision(3) << report.max_rel_error()
       << " (tolerance " << tolerance << "): " << (report.passed(tolerance) ? "pass" : "FAIL") << "\n";
    return os.str();
}

nlohmann::json to_json(const GradCheckReport& report, double tolerance) {
    nlohmann::json paths = nlohmann::json::array();
    for (const auto& e : report.paths) {
        paths.push_back({{"path", e.path},
                         {"entries", e.entries_checked},
                         {"max_rel_error", e.max_rel_error},
                         {"worst_entry", e.worst_entry},
                         {"analytic", e.analytic},
                         {"numeric", e.numeric}});
    }
    return {{"tolerance", tolerance},
            {"max_rel_error", report.max_rel_error()},
            {"passed", report.passed(tolerance)},
            {"paths", paths}};
}

double headline_metric(const EvalMetrics& m) { return m.task == TaskKind::Count ? m.mse : m.accuracy; }

bool higher_is_better(TaskKind task) { return task != TaskKind::Count; }

AblationReport run_ablation(const TrainConfig& base, const Dataset& train_data, const Dataset& eval_data,
                            const std::vector<FusionVariant>& variants, bool parallel) {
    AblationReport report;
    report.task = train_data.config.task;
    report.seed = base.seed;
    for (FusionVariant v : variants) {
        TrainConfig config = base;
        config.model.variant = v;
        TrainOptions options;
        options.parallel = parallel;
        TrainResult result = train(config, train_data, options);
        const Model model(result.checkpoint.config.model);
        AblationRow row;
        row.variant = v;
        row.metrics = evaluate(model, result.checkpoint.params, eval_data, parallel);
        row.history = std::move(result.history);
        row.diverged = result.diverged;
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

struct Trend {
    bool available = false;
    double triple = 0.0;
    double best_single = 0.0;
    bool holds = false;
};

bool is_single(FusionVariant v) {
    return v == FusionVariant::SingleAppearance || v == FusionVariant::SingleMotion ||
           v == FusionVariant::SingleAll;
}

Trend trend_of(const AblationReport& r) {
    Trend t;
    const bool higher = higher_is_better(r.task);
    bool have_triple = false, have_single = false;
    for (const auto& row : r.rows) {
        const double m = headline_metric(row.metrics);
        if (row.variant == FusionVariant::Triple) {
            t.triple = m;
            have_triple = true;
        } else if (is_single(row.variant)) {
            if (!have_single || (higher ? m > t.best_single : m < t.best_single)) t.best_single = m;
            have_single = true;
        }
    }
    t.available = have_triple && have_single;
    t.holds = t.available && (higher ? t.triple >= t.best_single : t.triple <= t.best_single);
    return t;
}

}  // namespace

nlohmann::json to_json(const AblationReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json history = nlohmann::json::array();
        for (const auto& h : row.history) {
            history.push_back({{"epoch", h.epoch}, {"loss", h.loss}, {"accuracy", h.accuracy}, {"mse", h.mse}});
        }
        rows.push_back({{"variant", to_string(row.variant)},
                        {"metric", headline_metric(row.metrics)},
                        {"eval", to_json(row.metrics)},
                        {"diverged", row.diverged},
                        {"history", history}});
    }
    const Trend t = trend_of(r);
    nlohmann::json trend = {{"available", t.available}};
    if (t.available) {
        trend["triple"] = t.triple;
        trend["best_single"] = t.best_single;
        trend["triple_at_least_best_single"] = t.holds;
    }
    return {{"task", to_string(r.task)},
            {"metric", r.task == TaskKind::Count ? "mse" : "accuracy"},
            {"seed", r.seed},
            {"rows", rows},
            {"trend", trend}};
}

std::string format_table(const AblationReport& r) {
    const char* metric = r.task == TaskKind::Count ? "mse" : "accuracy";
    std::ostringstream os;
    os << std::left << std::setw(18) << "variant" << std::right << std::setw(10) << metric << std::setw(10)
       << "loss" << std::setw(9) << "alpha_a" << std::setw(9) << "alpha_m" << std::setw(9) << "alpha_all"
       << "\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& row : r.rows) {
        const auto& m = row.metrics;
        os << std::left << std::setw(18) << to_string(row.variant) << std::right << std::setw(10)
           << headline_metric(m) << std::setw(10) << m.loss << std::setw(9) << m.mean_alpha[0] << std::setw(9)
           << m.mean_alpha[1] << std::setw(9) << m.mean_alpha[2] << (row.diverged ? "  (diverged)" : "") << "\n";
    }
    const Trend t = trend_of(r);
    if (t.available) {
        os << "trend: triple " << t.triple << (t.holds ? " >= " : " < ") << "best single " << t.best_single
           << (t.holds ? " (holds)" : " (does not hold)") << "\n";
    }
    return os.str();
}

namespace {

nlohmann::json matrix_json(const Tensor& t, bool log_scaled) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < t.cols(); ++c) {
            const double v = t(r, c);
            row.push_back(log_scaled ? std::log(std::max(v, 1e-300)) : v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json vector_json(const Tensor& t, bool log_scaled) {
    nlohmann::json out = nlohmann::json::array();
    for (double v : t.data()) out.push_back(log_scaled ? std::log(std::max(v, 1e-300)) : v);
    return out;
}

const char* kBranchNames[kBranchCount] = {"appearance", "motion", "all"};
const char* kStreamNames[2] = {"appearance", "motion"};

nlohmann::json pass_json(const QuestionTrace& pass, const ForwardResult& r, bool log_scaled) {
    nlohmann::json j;
    nlohmann::json streams = nlohmann::json::object();
    for (std::size_t s = 0; s < 2; ++s) {
        if (!pass.vq[s]) continue;
        nlohmann::json maps = nlohmann::json::array();
        for (Var m : pass.vq[s]->maps) maps.push_back(matrix_json(m.value(), log_scaled));
        nlohmann::json stream = {{"attention_maps", maps}};
        if (r.streams[s]) stream["adjacency"] = matrix_json(r.streams[s]->graph.adjacency.value(), log_scaled);
        streams[kStreamNames[s]] = std::move(stream);
    }
    j["streams"] = std::move(streams);
    nlohmann::json scores = nlohmann::json::object();
    if (pass.centered) {
        for (std::size_t b = 0; b < kBranchCount; ++b) {
            if (pass.centered->active[b]) {
                scores[kBranchNames[b]] = matrix_json(pass.centered->attended[b].scores.value(), log_scaled);
            }
        }
    }
    j["fusion_scores"] = std::move(scores);
    nlohmann::json alpha = nlohmann::json::object();
    if (pass.fusion) {
        for (std::size_t b = 0; b < kBranchCount; ++b) {
            if (!pass.centered->active[b]) continue;
            alpha[kBranchNames[b]] = log_scaled ? std::log(std::max(pass.alpha[b], 1e-300)) : pass.alpha[b];
        }
    }
    j["alpha"] = std::move(alpha);
    j["beta"] = vector_json(pass.aggregation.beta.value(), log_scaled);
    return j;
}

}  // namespace

nlohmann::json dump_attention(const Model& model, const ParamStore& params, const Episode& episode,
                              bool log_scaled) {
    Tape tape;
    const ForwardResult r = model.forward(tape, params, episode);
    nlohmann::json passes = nlohmann::json::array();
    for (std::size_t i = 0; i < r.passes.size(); ++i) {
        const auto& pass = r.passes[i];
        std::vector<std::uint32_t> tokens = episode.question.tokens;
        if (episode.question.task == TaskKind::MultipleChoice) {
            const auto& cand = episode.question.candidates[i];
            tokens.insert(tokens.end(), cand.begin(), cand.end());
        }
        nlohmann::json p = {{"tokens", tokens}, {"raw", pass_json(pass, r, false)}};
        if (log_scaled) p["log"] = pass_json(pass, r, true);
        passes.push_back(std::move(p));
    }
    return {{"task", to_string(episode.question.task)},
            {"variant", to_string(model.config().variant)},
            {"glimpses", model.config().glimpses},
            {"answer", episode.question.answer},
            {"prediction", r.output.prediction},
            {"scores", r.output.scores},
            {"passes", passes}};
}

std::string output_root() {
    const char* env = std::getenv("MASN_OUTPUT_ROOT");
    return (env && *env) ? std::string(env) : std::string("masn-out");
}

std::string resolve_output(const std::string& root, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(root) / p).string();
}

std::string config_hash(const nlohmann::json& config) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json j = {{"command", m.command},   {"config_hash", config_hash(m.config)}, {"config", m.config},
                        {"seed", m.seed},         {"started", m.started},                 {"finished", m.finished},
                        {"outputs", m.outputs},   {"metrics", m.metrics},                 {"status", m.status}};
    if (!m.error.empty()) j["error"] = m.error;
    return j;
}

void append_manifest(const std::string& root, const RunManifest& m) {
    std::filesystem::create_directories(root);
    const std::string path = (std::filesystem::path(root) / "runs.jsonl").string();
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append run manifest to " + path);
    out << to_json(m).dump() << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace masn::harness
