#pragma once

// Command-line front end: synth, train, eval, gradcheck, inspect.
// Exit codes: 0 success, 1 usage error, 2 data/model error.

#include "tafilter/checkpoint.hpp"
#include "tafilter/inspect.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace taf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    taf::detail::write_file_atomic(path, text);
}

struct SynthOptions {
    SynthSpec spec;
    std::string out;
};

struct TrainOptions {
    std::string manifest;
    std::string model = "static";
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    std::string out;
    std::string history;
};

struct EvalOptions {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
};

struct GradCheckOptions {
    std::string model = "static";
    std::uint64_t seed = 1;
    double tol = 1e-4;
    double h = 1e-5;
};

struct InspectOptions {
    std::string checkpoint;
    std::string features;
    long length = 100;
    std::string svg;
    std::string tsv;
};

inline int run_synth(const SynthOptions& o, std::ostream& out) {
    const fs::path manifest = synth_generate(o.spec, o.out);
    out << manifest.string() << '\n';
    return kExitOk;
}

inline int run_train(TrainOptions o, std::ostream& out) {
    o.model_cfg.kind = parse_model_kind(o.model);
    o.model_cfg.validate();
    o.train_cfg.validate();
    const Dataset ds = load_dataset(load_manifest(o.manifest));

    Checkpoint ckpt;
    std::vector<History> histories;
    if (o.train_cfg.one_vs_all) {
        auto r = fit_one_vs_all(o.model_cfg, ds, o.train_cfg);
        ckpt.models = std::move(r.ensemble.members);
        ckpt.one_vs_all = true;
        histories = std::move(r.histories);
    } else {
        auto r = fit(o.model_cfg, ds, o.train_cfg);
        ckpt.models.push_back(std::move(r.model));
        histories.push_back(std::move(r.history));
    }
    save_checkpoint(o.out, ckpt);
    if (!o.history.empty()) {
        std::ostringstream log;
        for (size_t k = 0; k < histories.size(); ++k) {
            if (histories.size() > 1) log << "# member " << k << '\n';
            write_history(log, histories[k]);
        }
        write_text(o.history, log.str());
    }

    auto split_accuracy = [&](const std::vector<FeatureSequence>& split) {
        size_t correct = 0;
        for (const auto& s : split) correct += ckpt.predict(s.data) == s.label;
        return double(correct) / double(split.size());
    };
    out << "checkpoint\t" << o.out << '\n';
    out << "train_accuracy\t" << split_accuracy(ds.train) << '\n';
    if (!ds.test.empty()) out << "test_accuracy\t" << split_accuracy(ds.test) << '\n';
    return kExitOk;
}

inline int run_eval(const EvalOptions& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const Dataset ds = load_dataset(load_manifest(o.manifest));
    require(ds.dim == ckpt.dim(), "feature dimension " + std::to_string(ds.dim) +
                                      " does not match checkpoint dimension " + std::to_string(ckpt.dim()));
    require(ds.classes <= ckpt.classes(), "manifest has more classes than the checkpoint");
    require_arg(o.split == "train" || o.split == "test", "split must be train or test");
    const auto& split = o.split == "train" ? ds.train : ds.test;
    require(!split.empty(), o.split + " split is empty");

    std::vector<int> truth, predicted;
    for (const auto& s : split) {
        truth.push_back(s.label);
        predicted.push_back(ckpt.predict(s.data));
    }
    const int classes = ckpt.classes();
    const Eigen::MatrixXi confusion = confusion_matrix(truth, predicted, classes);
    out << "accuracy\t" << double(confusion.trace()) / double(split.size()) << '\n';
    out << "true\\pred";
    for (int c = 0; c < classes; ++c) out << '\t' << c;
    out << '\n';
    for (int r = 0; r < classes; ++r) {
        out << r;
        for (int c = 0; c < classes; ++c) out << '\t' << confusion(r, c);
        out << '\n';
    }
    return kExitOk;
}

inline int run_gradcheck(const GradCheckOptions& o, std::ostream& out) {
    require_arg(o.tol > 0 && o.h > 0, "tol and h must be positive");
    const ModelKind kind = parse_model_kind(o.model);
    const auto report = grad_check(kind, default_grad_check_dims(kind), o.seed, o.h, o.tol);
    out << "group\tmax_rel_error\tcount\n";
    for (const auto& g : report.groups) out << g.name << '\t' << g.max_rel_error << '\t' << g.count << '\n';
    out << (report.pass ? "PASS" : "FAIL") << " (tol " << o.tol << ")\n";
    return report.pass ? kExitOk : kExitData;
}

inline int run_inspect(const InspectOptions& o, std::ostream& out, std::ostream& err) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    std::optional<FeatureSequence> features;
    if (!o.features.empty()) {
        features = load_features(o.features);
        require(features->dim() == ckpt.dim(), "feature dimension does not match checkpoint");
    }
    for (size_t k = 0; k < ckpt.models.size(); ++k) {
        const Placements p = inspect_placements(ckpt.models[k], o.length, features ? &features->data : nullptr);
        if (p.fallback)
            err << "warning: adaptive model inspected without --features; showing first-step placement\n";
        const std::string suffix = ckpt.models.size() > 1 ? "." + std::to_string(k) : "";
        if (!o.tsv.empty()) write_text(o.tsv + suffix, placements_tsv(p));
        if (!o.svg.empty()) write_text(o.svg + suffix, placements_svg(p));
        if (o.tsv.empty() && o.svg.empty()) out << placements_tsv(p);
    }
    return kExitOk;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Temporal attention filters for feature-sequence classification", "tafilter"};
    app.require_subcommand(1);

    detail::SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic planted-motif benchmark");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--classes", synth.spec.classes, "Class count")->capture_default_str();
    synth_cmd->add_option("--dim", synth.spec.dim, "Feature dimension")->capture_default_str();
    synth_cmd->add_option("--train-count", synth.spec.train_count)->capture_default_str();
    synth_cmd->add_option("--test-count", synth.spec.test_count)->capture_default_str();
    synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
    synth_cmd->add_option("--motif-len", synth.spec.motif_len)->capture_default_str();
    synth_cmd->add_option("--min-length", synth.spec.min_length)->capture_default_str();
    synth_cmd->add_option("--max-length", synth.spec.max_length)->capture_default_str();
    synth_cmd->add_option("--noise", synth.spec.noise_std, "Background noise std")->capture_default_str();
    synth_cmd->add_option("--jitter", synth.spec.jitter, "Relative std of motif placement")->capture_default_str();
    synth_cmd->add_option("--motif-scale", synth.spec.motif_scale)->capture_default_str();
    synth_cmd->add_option("--positions", synth.spec.positions, "Per-class relative motif centers");

    detail::TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train a classifier");
    train_cmd->add_option("--manifest", train.manifest)->required();
    train_cmd->add_option("--model", train.model, "max|sum|mean|pyramid|static|lstm")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
    train_cmd->add_option("--filters", train.model_cfg.filters, "Filter count M")->capture_default_str();
    train_cmd->add_option("--taps", train.model_cfg.taps, "Gaussian taps per filter N")->capture_default_str();
    train_cmd->add_option("--pyramid-level", train.model_cfg.pyramid_level)->capture_default_str();
    train_cmd->add_option("--hidden", train.model_cfg.hidden, "Classifier hidden width")->capture_default_str();
    train_cmd->add_option("--lstm-hidden", train.model_cfg.lstm_hidden)->capture_default_str();
    train_cmd->add_option("--steps", train.model_cfg.steps, "LSTM iterations S")->capture_default_str();
    train_cmd->add_option("--iters", train.train_cfg.iterations)->capture_default_str();
    train_cmd->add_option("--batch", train.train_cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", train.train_cfg.learning_rate)->capture_default_str();
    train_cmd->add_option("--momentum", train.train_cfg.momentum)->capture_default_str();
    train_cmd->add_option("--seed", train.train_cfg.seed)->capture_default_str();
    train_cmd->add_option("--max-skip", train.train_cfg.max_skip)->capture_default_str();
    train_cmd->add_option("--eval-every", train.train_cfg.eval_every)->capture_default_str();
    train_cmd->add_flag("--one-vs-all", train.train_cfg.one_vs_all);
    train_cmd->add_option("--history", train.history, "Write the training log (TSV) here");

    detail::EvalOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--manifest", eval.manifest)->required();
    eval_cmd->add_option("--split", eval.split)->capture_default_str();

    detail::GradCheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
    gc_cmd->add_option("--model", gc.model)->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
    gc_cmd->add_option("--tol", gc.tol)->capture_default_str();
    gc_cmd->add_option("--step", gc.h, "Finite-difference step h")->capture_default_str();

    detail::InspectOptions inspect;
    auto* inspect_cmd = app.add_subcommand("inspect", "Report learned filter placements");
    inspect_cmd->add_option("--checkpoint", inspect.checkpoint)->required();
    inspect_cmd->add_option("--features", inspect.features, "Sequence to place adaptive filters on");
    inspect_cmd->add_option("--length", inspect.length, "Nominal sequence length")->capture_default_str();
    inspect_cmd->add_option("--svg", inspect.svg);
    inspect_cmd->add_option("--tsv", inspect.tsv);

    std::vector<char*> argv;
    std::string prog = "tafilter";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*synth_cmd) return detail::run_synth(synth, out);
        if (*train_cmd) return detail::run_train(train, out);
        if (*eval_cmd) return detail::run_eval(eval, out);
        if (*gc_cmd) return detail::run_gradcheck(gc, out);
        if (*inspect_cmd) return detail::run_inspect(inspect, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace taf::cli
