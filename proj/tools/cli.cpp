#include "cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "masn/binary_io.hpp"
#include "masn/errors.hpp"
#include "masn/harness.hpp"

namespace masn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    const std::vector<char> text = io::read_file(path);
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
}

// Inputs: as given if the file exists, otherwise under the output root.
std::string resolve_input(const std::string& root, const std::string& path) {
    if (fs::exists(path)) return path;
    const std::string under_root = harness::resolve_output(root, path);
    return fs::exists(under_root) ? under_root : path;
}

std::string prepare_output(const std::string& root, const std::string& path) {
    const std::string resolved = harness::resolve_output(root, path);
    const fs::path parent = fs::path(resolved).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    return resolved;
}

template <typename T>
void apply(std::optional<T> flag, T& field) {
    if (flag) field = *flag;
}

struct GenOptions {
    std::string config;
    std::string out = "episodes.masn";
    std::size_t count = 100;
    std::uint64_t seed = 0;
    std::optional<std::string> task, cue;
    std::optional<std::size_t> frames, objects, feature_dim, vocab, choices, count_min, count_max;
    std::optional<double> noise, distractor_rate;
    std::optional<std::uint64_t> prototype_seed;
};

struct TrainFlags {
    std::string config;
    std::optional<std::size_t> epochs, batch, objects, d, embed_dim, glimpses;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> variant;
    bool clip = false;
    bool serial = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--config", f.config, "Training config JSON");
    cmd->add_option("--epochs", f.epochs, "Number of epochs");
    cmd->add_option("--lr", f.lr, "Adam learning rate");
    cmd->add_option("--batch", f.batch, "Batch size (0: 32, or 16 for multiple choice)");
    cmd->add_option("--seed", f.seed, "Initialization and shuffling seed");
    cmd->add_option("--objects", f.objects, "Objects per frame N the dataset must have");
    cmd->add_option("--d", f.d, "Model width");
    cmd->add_option("--embed-dim", f.embed_dim, "Word embedding width");
    cmd->add_option("--glimpses", f.glimpses, "Bilinear attention glimpses g");
    cmd->add_option("--variant", f.variant, "Fusion variant");
    cmd->add_flag("--clip", f.clip, "Clip the global gradient norm at 5");
    cmd->add_flag("--serial", f.serial, "Compute batch gradients on one thread");
}

// Precedence: flags > config file > base (dataset-derived defaults or a
// resumed checkpoint's config).
TrainConfig build_train_config(TrainConfig base, const TrainFlags& f) {
    if (!f.config.empty()) base = train_config_from_json(read_json(f.config), base);
    apply(f.epochs, base.epochs);
    apply(f.lr, base.learning_rate);
    apply(f.batch, base.batch_size);
    apply(f.seed, base.seed);
    apply(f.objects, base.objects_per_frame);
    apply(f.d, base.model.d);
    apply(f.embed_dim, base.model.embed_dim);
    apply(f.glimpses, base.model.glimpses);
    if (f.variant) base.model.variant = parse_fusion_variant(*f.variant);
    if (f.clip) base.clip_norm = 5.0;
    base.validate();
    return base;
}

TrainConfig dataset_defaults(const Dataset& ds) {
    TrainConfig c;
    c.model.task = ds.config.task;
    c.objects_per_frame = ds.config.objects_per_frame;
    return c;
}

json history_json(const std::vector<EpochMetrics>& history) {
    json h = json::array();
    for (const auto& m : history) {
        h.push_back({{"epoch", m.epoch}, {"loss", m.loss}, {"accuracy", m.accuracy}, {"mse", m.mse}});
    }
    return h;
}

std::string epoch_line(const EpochMetrics& m, TaskKind task) {
    std::ostringstream os;
    os << "epoch " << m.epoch << "  loss " << m.loss << "  accuracy " << m.accuracy;
    if (task == TaskKind::Count) os << "  mse " << m.mse;
    return os.str();
}

// Runs `body`, then appends the manifest whether it succeeded or threw.
int with_manifest(const std::string& root, const std::string& command, harness::RunManifest& m,
                  const std::function<int()>& body) {
    m.command = command;
    m.started = harness::utc_timestamp();
    int code = kOk;
    try {
        code = body();
    } catch (const std::exception& e) {
        m.status = "error";
        m.error = e.what();
        m.finished = harness::utc_timestamp();
        harness::append_manifest(root, m);
        throw;
    }
    if (code != kOk) m.status = "failed";
    m.finished = harness::utc_timestamp();
    harness::append_manifest(root, m);
    return code;
}

int cmd_gen(const std::string& root, const GenOptions& o, std::ostream& out) {
    harness::RunManifest m;
    return with_manifest(root, "gen", m, [&] {
        GeneratorConfig g;
        if (!o.config.empty()) g = generator_config_from_json(read_json(o.config));
        if (o.task) g.task = parse_task_kind(*o.task);
        if (o.cue) g.cue = parse_cue_mode(*o.cue);
        apply(o.frames, g.frames);
        apply(o.objects, g.objects_per_frame);
        apply(o.feature_dim, g.feature_dim);
        apply(o.vocab, g.vocab);
        apply(o.choices, g.num_choices);
        apply(o.count_min, g.count_min);
        apply(o.count_max, g.count_max);
        apply(o.noise, g.noise);
        apply(o.distractor_rate, g.distractor_rate);
        apply(o.prototype_seed, g.prototype_seed);
        g.validate();
        m.config = {{"generator", to_json(g)}, {"count", o.count}};
        m.seed = o.seed;

        const std::string path = prepare_output(root, o.out);
        write_episodes(path, Dataset{g, generate_episodes(g, o.count, o.seed)});
        m.outputs = {path};
        m.metrics = {{"episodes", o.count}};
        out << "wrote " << o.count << " " << to_string(g.task) << " episodes (cue " << to_string(g.cue) << ") to "
            << path << "\n";
        return kOk;
    });
}

struct TrainOptionsCli {
    std::string data;
    std::string out = "checkpoint";
    std::string resume;
    TrainFlags flags;
};

int cmd_train(const std::string& root, const TrainOptionsCli& o, std::ostream& out, std::ostream& err) {
    harness::RunManifest m;
    return with_manifest(root, "train", m, [&] {
        const Dataset ds = load_episodes(resolve_input(root, o.data));
        std::optional<Checkpoint> resume;
        TrainConfig base = dataset_defaults(ds);
        if (!o.resume.empty()) {
            resume = load_checkpoint(resolve_input(root, o.resume));
            base = resume->config;
        }
        const TrainConfig config = build_train_config(base, o.flags);
        m.config = to_json(config);
        m.seed = config.seed;

        TrainOptions options;
        options.parallel = !o.flags.serial;
        options.on_epoch = [&](const EpochMetrics& e) { out << epoch_line(e, ds.config.task) << "\n" << std::flush; };
        TrainResult result = train(config, ds, options, std::move(resume));

        const std::string dir = prepare_output(root, o.out);
        save_checkpoint(dir, result.checkpoint);
        json metrics = {{"task", to_string(ds.config.task)},
                        {"history", history_json(result.history)},
                        {"diverged", result.diverged}};
        if (result.diverged) {
            metrics["divergence_reason"] = result.divergence_reason;
        } else {
            const Model model(result.checkpoint.config.model);
            metrics["final"] = to_json(evaluate(model, result.checkpoint.params, ds, options.parallel));
        }
        const std::string metrics_path = (fs::path(dir) / "metrics.json").string();
        io::write_text_atomic(metrics_path, metrics.dump(2) + "\n");
        m.outputs = {dir, metrics_path};
        m.metrics = metrics.contains("final") ? metrics["final"] : json::object();
        if (result.diverged) {
            err << "training diverged: " << result.divergence_reason << "\nlast good checkpoint (epoch "
                << result.checkpoint.epoch << ") saved to " << dir << "\n";
            return static_cast<int>(kDiverged);
        }
        out << "checkpoint saved to " << dir << "\n" << metrics["final"].dump(2) << "\n";
        return static_cast<int>(kOk);
    });
}

struct EvalOptions {
    std::string checkpoint, data;
    std::string out = "eval.json";
    bool serial = false;
};

int cmd_eval(const std::string& root, const EvalOptions& o, std::ostream& out) {
    harness::RunManifest m;
    return with_manifest(root, "eval", m, [&] {
        const Checkpoint ck = load_checkpoint(resolve_input(root, o.checkpoint));
        const Dataset ds = load_episodes(resolve_input(root, o.data));
        m.config = {{"checkpoint", o.checkpoint}, {"data", o.data}, {"model", to_json(ck.config.model)}};
        m.seed = ck.config.seed;
        const Model model(ck.config.model);
        const json metrics = to_json(evaluate(model, ck.params, ds, !o.serial));
        const std::string path = prepare_output(root, o.out);
        io::write_text_atomic(path, metrics.dump(2) + "\n");
        m.outputs = {path};
        m.metrics = metrics;
        out << metrics.dump(2) << "\n";
        return kOk;
    });
}

struct AblateOptions {
    std::string data, eval_data;
    std::string variants;
    std::string out = "ablation";
    TrainFlags flags;
};

std::vector<FusionVariant> parse_variants(const std::string& list) {
    if (list.empty()) return ablation_variants();
    std::vector<FusionVariant> v;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) v.push_back(parse_fusion_variant(item));
    }
    if (v.empty()) throw ConfigError("no variants given");
    return v;
}

int cmd_ablate(const std::string& root, const AblateOptions& o, std::ostream& out) {
    harness::RunManifest m;
    return with_manifest(root, "ablate", m, [&] {
        const Dataset ds = load_episodes(resolve_input(root, o.data));
        const Dataset eval_ds = o.eval_data.empty() ? ds : load_episodes(resolve_input(root, o.eval_data));
        const std::vector<FusionVariant> variants = parse_variants(o.variants);
        const TrainConfig config = build_train_config(dataset_defaults(ds), o.flags);
        json names = json::array();
        for (FusionVariant v : variants) names.push_back(to_string(v));
        m.config = {{"train", to_json(config)}, {"variants", names}};
        m.seed = config.seed;

        const harness::AblationReport report = harness::run_ablation(config, ds, eval_ds, variants, !o.flags.serial);
        const std::string dir = prepare_output(root, o.out);
        fs::create_directories(dir);
        const json j = harness::to_json(report);
        const std::string table = harness::format_table(report);
        const std::string json_path = (fs::path(dir) / "ablation.json").string();
        const std::string text_path = (fs::path(dir) / "ablation.txt").string();
        io::write_text_atomic(json_path, j.dump(2) + "\n");
        io::write_text_atomic(text_path, table);
        m.outputs = {json_path, text_path};
        m.metrics = j["trend"];
        out << table;
        return kOk;
    });
}

struct DumpOptions {
    std::string checkpoint, data;
    std::size_t index = 0;
    bool log_scaled = false;
    std::string out = "attention.json";
};

int cmd_dump(const std::string& root, const DumpOptions& o, std::ostream& out) {
    harness::RunManifest m;
    return with_manifest(root, "dump-attention", m, [&] {
        const Checkpoint ck = load_checkpoint(resolve_input(root, o.checkpoint));
        const Dataset ds = load_episodes(resolve_input(root, o.data));
        m.config = {{"checkpoint", o.checkpoint}, {"data", o.data}, {"index", o.index}, {"log", o.log_scaled}};
        m.seed = ck.config.seed;
        if (o.index >= ds.episodes.size()) {
            throw ConfigError("episode index " + std::to_string(o.index) + " out of range (dataset has " +
                              std::to_string(ds.episodes.size()) + ")");
        }
        const Model model(ck.config.model);
        json j = harness::dump_attention(model, ck.params, ds.episodes[o.index], o.log_scaled);
        j["episode_index"] = o.index;
        const std::string path = prepare_output(root, o.out);
        io::write_text_atomic(path, j.dump(2) + "\n");
        m.outputs = {path};
        out << "attention for episode " << o.index << " written to " << path << "\n";
        return kOk;
    });
}

struct GradcheckOptions {
    std::string config;
    std::optional<std::size_t> d, embed_dim, frames, objects, question_len, glimpses, feature_dim, vocab;
    std::optional<std::string> task, variant;
    std::optional<std::uint64_t> seed;
    double eps = 1e-5;
    std::size_t max_entries = 64;
    double tolerance = 1e-4;
    bool head_only = false;
    bool inject_bug = false;
    bool double_oracle = false;
    std::string out = "gradcheck.json";
};

harness::TinyProfile tiny_profile_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("gradcheck config must be a JSON object");
    harness::TinyProfile p;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "d") p.d = value.get<std::size_t>();
            else if (key == "embed_dim") p.embed_dim = value.get<std::size_t>();
            else if (key == "T") p.frames = value.get<std::size_t>();
            else if (key == "N") p.objects_per_frame = value.get<std::size_t>();
            else if (key == "L") p.question_len = value.get<std::size_t>();
            else if (key == "glimpses") p.glimpses = value.get<std::size_t>();
            else if (key == "d_in") p.feature_dim = value.get<std::size_t>();
            else if (key == "vocab") p.vocab = value.get<std::size_t>();
            else if (key == "task") p.task = parse_task_kind(value.get<std::string>());
            else if (key == "variant") p.variant = parse_fusion_variant(value.get<std::string>());
            else if (key == "seed") p.seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown gradcheck config key: " + key);
        } catch (const json::exception& e) {
            throw ConfigError("gradcheck config key '" + key + "': " + e.what());
        }
    }
    return p;
}

json to_json(const harness::TinyProfile& p) {
    return {{"d", p.d},         {"embed_dim", p.embed_dim},        {"T", p.frames},
            {"N", p.objects_per_frame}, {"L", p.question_len},     {"glimpses", p.glimpses},
            {"d_in", p.feature_dim},    {"vocab", p.vocab},        {"task", to_string(p.task)},
            {"variant", to_string(p.variant)}, {"seed", p.seed}};
}

int cmd_gradcheck(const std::string& root, const GradcheckOptions& o, std::ostream& out) {
    harness::RunManifest m;
    return with_manifest(root, "gradcheck", m, [&] {
        harness::TinyProfile p;
        if (!o.config.empty()) p = tiny_profile_from_json(read_json(o.config));
        apply(o.d, p.d);
        apply(o.embed_dim, p.embed_dim);
        apply(o.frames, p.frames);
        apply(o.objects, p.objects_per_frame);
        apply(o.question_len, p.question_len);
        apply(o.glimpses, p.glimpses);
        apply(o.feature_dim, p.feature_dim);
        apply(o.vocab, p.vocab);
        apply(o.seed, p.seed);
        if (o.task) p.task = parse_task_kind(*o.task);
        if (o.variant) p.variant = parse_fusion_variant(*o.variant);
        if (o.d && *o.d > 16) out << "note: d > 16 makes finite-difference checking slow\n";
        m.config = {{"profile", to_json(p)},
                    {"eps", o.eps},
                    {"max_entries", o.max_entries},
                    {"tolerance", o.tolerance},
                    {"head_only", o.head_only},
                    {"inject_bug", o.inject_bug},
                    {"numeric_precision", o.double_oracle ? "double" : "extended"}};
        m.seed = p.seed;

        const GradCheckOptions options{o.eps, o.max_entries};
        const GradCheckReport report =
            o.head_only ? harness::gradcheck_head_only(p, options, o.inject_bug)
                        : harness::gradcheck_model(p, options, o.inject_bug,
                                                   o.double_oracle ? harness::NumericPrecision::Double
                                                                   : harness::NumericPrecision::Extended);
        const json j = harness::to_json(report, o.tolerance);
        const std::string path = prepare_output(root, o.out);
        io::write_text_atomic(path, j.dump(2) + "\n");
        m.outputs = {path};
        m.metrics = {{"max_rel_error", report.max_rel_error()}, {"passed", report.passed(o.tolerance)}};
        out << harness::format_gradcheck(report, o.tolerance);
        return report.passed(o.tolerance) ? kOk : kCheckFailed;
    });
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Motion-appearance synergistic networks: data generation, training and diagnostics", "masn"};
    app.require_subcommand(1);
    app.footer("Outputs go under $MASN_OUTPUT_ROOT (default ./masn-out); each run appends to runs.jsonl there.");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic episode file");
    gen_cmd->add_option("--config", gen.config, "Generator config JSON");
    gen_cmd->add_option("--out", gen.out, "Episode file to write")->capture_default_str();
    gen_cmd->add_option("--count", gen.count, "Number of episodes")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Episode seed")->capture_default_str();
    gen_cmd->add_option("--task", gen.task, "count | open_ended | multiple_choice");
    gen_cmd->add_option("--cue", gen.cue, "appearance | motion | mixed");
    gen_cmd->add_option("--frames", gen.frames, "Frames T");
    gen_cmd->add_option("--objects", gen.objects, "Objects per frame N");
    gen_cmd->add_option("--feature-dim", gen.feature_dim, "Feature width d_in");
    gen_cmd->add_option("--vocab", gen.vocab, "Vocabulary size");
    gen_cmd->add_option("--choices", gen.choices, "Candidates per multiple-choice question");
    gen_cmd->add_option("--count-min", gen.count_min, "Smallest count answer");
    gen_cmd->add_option("--count-max", gen.count_max, "Largest count answer");
    gen_cmd->add_option("--noise", gen.noise, "Feature noise level");
    gen_cmd->add_option("--distractor-rate", gen.distractor_rate, "Probability of a distractor per slot");
    gen_cmd->add_option("--prototype-seed", gen.prototype_seed, "Seed of the pattern prototypes");

    TrainOptionsCli tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model and save a checkpoint");
    train_cmd->add_option("--data", tr.data, "Episode file")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint directory")->capture_default_str();
    train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint directory");
    add_train_flags(train_cmd, tr.flags);

    EvalOptions ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on an episode file");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
    eval_cmd->add_option("--data", ev.data, "Episode file")->required();
    eval_cmd->add_option("--out", ev.out, "Metrics JSON to write")->capture_default_str();
    eval_cmd->add_flag("--serial", ev.serial, "Evaluate on one thread");

    AblateOptions ab;
    auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate each fusion variant from the same seed");
    ablate_cmd->add_option("--data", ab.data, "Training episode file")->required();
    ablate_cmd->add_option("--eval-data", ab.eval_data, "Evaluation episode file (default: training data)");
    ablate_cmd->add_option("--variants", ab.variants, "Comma-separated variants (default: the 8-variant sweep)");
    ablate_cmd->add_option("--out", ab.out, "Report directory")->capture_default_str();
    add_train_flags(ablate_cmd, ab.flags);

    DumpOptions du;
    auto* dump_cmd = app.add_subcommand("dump-attention", "Export attention maps, fusion scores, alpha and beta");
    dump_cmd->add_option("--checkpoint", du.checkpoint, "Checkpoint directory")->required();
    dump_cmd->add_option("--data", du.data, "Episode file")->required();
    dump_cmd->add_option("--index", du.index, "Episode index")->capture_default_str();
    dump_cmd->add_flag("--log", du.log_scaled, "Also emit log-scaled copies");
    dump_cmd->add_option("--out", du.out, "JSON file to write")->capture_default_str();

    GradcheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every parameter path");
    gc_cmd->add_option("--config", gc.config, "Profile JSON (d, embed_dim, T, N, L, glimpses, d_in, vocab, ...)");
    gc_cmd->add_option("--d", gc.d, "Model width (default 8)");
    gc_cmd->add_option("--embed-dim", gc.embed_dim, "Word embedding width (default 8)");
    gc_cmd->add_option("--frames", gc.frames, "Frames T (default 2)");
    gc_cmd->add_option("--objects", gc.objects, "Objects per frame N (default 2)");
    gc_cmd->add_option("--question-len", gc.question_len, "Question length L (default 3)");
    gc_cmd->add_option("--glimpses", gc.glimpses, "Glimpses g (default 2)");
    gc_cmd->add_option("--feature-dim", gc.feature_dim, "Feature width d_in (default 6)");
    gc_cmd->add_option("--vocab", gc.vocab, "Vocabulary size (default 6)");
    gc_cmd->add_option("--task", gc.task, "count | open_ended | multiple_choice");
    gc_cmd->add_option("--variant", gc.variant, "Fusion variant");
    gc_cmd->add_option("--seed", gc.seed, "Episode and initialization seed");
    gc_cmd->add_option("--eps", gc.eps, "Central-difference step")->capture_default_str();
    gc_cmd->add_option("--max-entries", gc.max_entries, "Entries checked per tensor")->capture_default_str();
    gc_cmd->add_option("--tolerance", gc.tolerance, "Failing relative error")->capture_default_str();
    gc_cmd->add_flag("--head-only", gc.head_only, "Check the count head alone on a fixed feature vector");
    gc_cmd->add_flag("--inject-bug", gc.inject_bug, "Double the analytic gradients (must fail)");
    gc_cmd->add_flag("--double-oracle", gc.double_oracle, "Take central differences in double precision");
    gc_cmd->add_option("--out", gc.out, "Report JSON to write")->capture_default_str();

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.push_back("masn");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    const std::string root = harness::output_root();
    try {
        if (*gen_cmd) return cmd_gen(root, gen, out);
        if (*train_cmd) return cmd_train(root, tr, out, err);
        if (*eval_cmd) return cmd_eval(root, ev, out);
        if (*ablate_cmd) return cmd_ablate(root, ab, out);
        if (*dump_cmd) return cmd_dump(root, du, out);
        if (*gc_cmd) return cmd_gradcheck(root, gc, out);
    } catch (const TaskMismatchError& e) {
        err << "task mismatch: " << e.what() << "\n";
        return kTaskMismatch;
    } catch (const FormatError& e) {
        err << e.what() << "\n";
        return kBadFile;
    } catch (const VersionError& e) {
        err << "version error: " << e.what() << "\n";
        return kBadFile;
    } catch (const TruncatedError& e) {
        err << "truncated file: " << e.what() << "\n";
        return kBadFile;
    } catch (const ShapeInconsistencyError& e) {
        err << e.what() << "\n";
        return kBadFile;
    } catch (const IoError& e) {
        err << "file error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return kIoFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const ShapeError& e) {
        err << "shape error: " << e.what() << "\n";
        return kShapeMismatch;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kUsage;
}

}  // namespace masn::cli
