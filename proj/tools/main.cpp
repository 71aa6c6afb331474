// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0
//
// protoseg command line: dataset generation, episodic training, evaluation
// protocols, and parameter sweeps.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "protoseg/checkpoint.hpp"
#include "protoseg/dataset.hpp"
#include "protoseg/evaluation.hpp"
#include "protoseg/textconf.hpp"
#include "protoseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace protoseg;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_run_manifest(const fs::path& out_dir, const std::string& command,
                        const std::string& config_path, std::uint64_t seed,
                        const std::string& checkpoint, const std::string& started,
                        const std::vector<std::pair<std::string, std::string>>& artifacts) {
    TextConfig m;
    m.set("command", command);
    m.set("config", config_path.empty() ? "(none)" : config_path);
    m.set("seed", seed);
    m.set("checkpoint", checkpoint.empty() ? "(none)" : checkpoint);
    m.set("output_dir", out_dir.string());
    m.set("started", started);
    m.set("finished", timestamp());
    for (const auto& [k, v] : artifacts) m.set("artifacts." + k, v);
    m.save((out_dir / "run_manifest.txt").string());
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
    std::string out;
    int classes = 16;
    int per_class = 50;
    int size = 64;
    std::uint64_t seed = 7;
    bool force = false;
};

int run_gen(const GenArgs& args) {
    const std::string started = timestamp();
    const fs::path out(args.out);
    if (fs::exists(out) && !fs::is_empty(out) && !args.force)
        throw std::invalid_argument("output directory " + args.out +
                                    " exists and is not empty (use --force to overwrite)");
    GenConfig cfg;
    cfg.num_classes = args.classes;
    cfg.images_per_class = args.per_class;
    cfg.image_size = args.size;
    cfg.seed = args.seed;
    const auto samples = generate_dataset(cfg);
    fs::create_directories(out);
    save_dataset(out.string(), samples, cfg);
    write_run_manifest(out, "gen", "", args.seed, "", started,
                       {{"manifest", "manifest.txt"},
                        {"images", "images/"},
                        {"labels", "labels/"}});
    std::cout << "wrote " << samples.size() << " samples to " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config_path;
    int split = 0;
    TrainConfig cfg;
    bool no_mcl = false, no_pff = false, no_spt = false, freeze_encoder = false;
    std::string reduction = "mean";
};

void apply_config_file(const TextConfig& file, CLI::App* cmd, TrainArgs& args) {
    // Precedence: CLI flag > config file > built-in default. CLI11 already
    // wrote flag values; the file only fills options the user did not pass.
    auto absent = [cmd](const std::string& flag) { return cmd->count(flag) == 0; };
    if (file.has("train.episodes") && absent("--episodes"))
        args.cfg.episodes = static_cast<int>(file.get_int("train.episodes"));
    if (file.has("train.lr0") && absent("--lr0")) args.cfg.lr0 = file.get_double("train.lr0");
    if (file.has("train.momentum") && absent("--momentum"))
        args.cfg.momentum = file.get_double("train.momentum");
    if (file.has("train.weight_decay") && absent("--weight-decay"))
        args.cfg.weight_decay = file.get_double("train.weight_decay");
    if (file.has("train.poly_power") && absent("--poly-power"))
        args.cfg.poly_power = file.get_double("train.poly_power");
    if (file.has("train.batch_size") && absent("--batch-size"))
        args.cfg.batch_size = static_cast<int>(file.get_int("train.batch_size"));
    if (file.has("train.lambda_mcl") && absent("--lambda-mcl"))
        args.cfg.lambda_mcl = file.get_double("train.lambda_mcl");
    if (file.has("train.seed") && absent("--seed"))
        args.cfg.seed = static_cast<std::uint64_t>(file.get_int("train.seed"));
    if (file.has("train.split") && absent("--split"))
        args.split = static_cast<int>(file.get_int("train.split"));
    if (file.has("train.reduction") && absent("--reduction"))
        args.reduction = file.get("train.reduction");
    if (file.has("train.no_mcl") && absent("--no-mcl")) args.no_mcl = file.get_bool("train.no_mcl");
    if (file.has("train.no_pff") && absent("--no-pff")) args.no_pff = file.get_bool("train.no_pff");
    if (file.has("train.no_spt") && absent("--no-spt")) args.no_spt = file.get_bool("train.no_spt");
    if (file.has("train.freeze_encoder") && absent("--freeze-encoder"))
        args.freeze_encoder = file.get_bool("train.freeze_encoder");
    if (file.has("train.val_interval") && absent("--val-interval"))
        args.cfg.val_interval = static_cast<int>(file.get_int("train.val_interval"));
    if (file.has("train.val_episodes") && absent("--val-episodes"))
        args.cfg.val_episodes = static_cast<int>(file.get_int("train.val_episodes"));
}

std::string loss_csv(const std::vector<TrainRecord>& trace, int window) {
    std::string csv = "episode,lr,total,l_q,l_s,l_seg\n";
    double tot = 0, lq = 0, ls = 0, lseg = 0;
    int n = 0;
    for (const auto& rec : trace) {
        tot += rec.losses.total;
        lq += rec.losses.l_q;
        ls += rec.losses.l_s;
        lseg += rec.losses.l_seg;
        ++n;
        if (n == window || rec.episode + 1 == static_cast<int>(trace.size())) {
            csv += std::to_string(rec.episode + 1) + "," + format_double(rec.lr) + "," +
                   format_double(tot / n) + "," + format_double(lq / n) + "," +
                   format_double(ls / n) + "," + format_double(lseg / n) + "\n";
            tot = lq = ls = lseg = 0;
            n = 0;
        }
    }
    return csv;
}

int run_train(const TrainArgs& args) {
    const std::string started = timestamp();
    const Dataset ds = load_dataset(args.data);

    TrainArgs a = args;
    a.cfg.flags.use_mcl = !a.no_mcl;
    a.cfg.flags.use_pff = !a.no_pff;
    a.cfg.flags.use_spt = !a.no_spt;
    a.cfg.flags.freeze_encoder = a.freeze_encoder;
    a.cfg.reduction = reduction_from_name(a.reduction);
    a.cfg.validate();

    const SplitConfig split = make_splits(ds.config.num_classes, a.split);
    TrainingResult result = run_training(ds, split, a.cfg);

    fs::create_directories(a.out);
    const fs::path ckpt = fs::path(a.out) / "model.ckpt";
    save_checkpoint(ckpt.string(), result);
    write_text(fs::path(a.out) / "loss.csv", loss_csv(result.trace, 100));

    TextConfig val;
    val.set("count", static_cast<int>(result.validation.size()));
    for (std::size_t i = 0; i < result.validation.size(); ++i) {
        val.set("val.v" + std::to_string(i) + ".episode", result.validation[i].episode);
        val.set("val.v" + std::to_string(i) + ".mean_iou", result.validation[i].mean_iou);
    }
    val.save((fs::path(a.out) / "validation.txt").string());

    write_run_manifest(a.out, "train", a.config_path, a.cfg.seed, ckpt.string(), started,
                       {{"checkpoint", "model.ckpt"},
                        {"loss_csv", "loss.csv"},
                        {"validation", "validation.txt"}});
    std::cout << "trained " << a.cfg.episodes << " episodes on split " << a.split
              << "; final loss "
              << format_double(result.trace.empty() ? 0.0 : result.trace.back().losses.total)
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    EvalConfig cfg;
    std::string prototype = "fused";
    std::string annotation = "dense";
    bool include_pseudo = false;
    bool save_masks = false;
    bool per_episode_average = false;
};

int run_eval(const EvalArgs& args) {
    const std::string started = timestamp();
    const Dataset ds = load_dataset(args.data);
    LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);

    EvalConfig cfg = args.cfg;
    cfg.prototype = prototype_mode_from_name(args.prototype);
    cfg.annotation = annotation_mode_from_name(args.annotation);
    if (args.include_pseudo) cfg.prototype = PrototypeMode::fused;
    if (args.per_episode_average) cfg.averaging = EpisodeAveraging::per_episode_mean;

    const EvalResult result =
        evaluate_model(ckpt.model, ds, ckpt.split, cfg, /*keep_masks=*/args.save_masks);

    fs::create_directories(args.out);
    write_text(fs::path(args.out) / "metrics.csv",
               metrics_csv(result, ckpt.split.split_index, cfg.seed));
    write_text(fs::path(args.out) / "summary.txt",
               metrics_summary(result, cfg, ckpt.split.split_index));
    write_text(fs::path(args.out) / "episodes.txt", episode_records_text(result.records));
    if (args.save_masks) export_masks((fs::path(args.out) / "masks").string(), result);

    write_run_manifest(args.out, "eval", "", cfg.seed, args.checkpoint, started,
                       {{"metrics_csv", "metrics.csv"},
                        {"summary", "summary.txt"},
                        {"episodes", "episodes.txt"}});
    std::cout << "mean_iou " << format_double(result.aggregate.mean_iou) << " binary_iou "
              << format_double(result.aggregate.binary_iou) << " over " << cfg.runs << "x"
              << cfg.episodes << " episodes\n";
    return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string data;
    std::string out;
    std::string mode = "lambda";
    int split = 0;
    int episodes = 2000;
    int eval_episodes = 100;
    std::uint64_t seed = 0;
};

int run_sweep(const SweepArgs& args) {
    const std::string started = timestamp();
    const Dataset ds = load_dataset(args.data);
    const SplitConfig split = make_splits(ds.config.num_classes, args.split);

    auto point = [&](const TrainConfig& cfg) {
        TrainConfig c = cfg;
        c.val_interval = 0;
        TrainingResult r = run_training(ds, split, c);
        EvalConfig e;
        e.runs = 1;
        e.episodes = args.eval_episodes;
        e.seed = args.seed + 1;
        return evaluate_model(r.model, ds, split, e).aggregate.mean_iou;
    };

    std::string csv = "param,mean_iou\n";
    if (args.mode == "lambda") {
        const double grid[] = {0.01, 0.05, 0.075, 0.09, 0.1, 0.15, 0.2, 0.3, 0.5, 0.75, 1.0};
        for (double lambda : grid) {
            TrainConfig cfg;
            cfg.episodes = args.episodes;
            cfg.seed = args.seed;
            cfg.lambda_mcl = lambda;
            csv += format_double(lambda) + "," + format_double(point(cfg)) + "\n";
            std::cout << "lambda " << format_double(lambda) << " done\n";
        }
    } else if (args.mode == "lrbatch") {
        const double lrs[] = {2.5e-4, 5e-4, 1e-3};
        const int batches[] = {1, 2, 4};
        for (double lr : lrs) {
            for (int batch : batches) {
                TrainConfig cfg;
                cfg.episodes = args.episodes;
                cfg.seed = args.seed;
                cfg.lr0 = lr;
                cfg.batch_size = batch;
                csv += format_double(lr) + ":" + std::to_string(batch) + "," +
                       format_double(point(cfg)) + "\n";
                std::cout << "lr " << format_double(lr) << " batch " << batch << " done\n";
            }
        }
    } else {
        throw std::invalid_argument("sweep mode must be 'lambda' or 'lrbatch'");
    }

    fs::create_directories(args.out);
    write_text(fs::path(args.out) / "sweep.csv", csv);
    write_run_manifest(args.out, "sweep", "", args.seed, "", started,
                       {{"sweep_csv", "sweep.csv"}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prototype-guided one-shot semantic segmentation workbench"};
    app.require_subcommand(1);

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic shapes dataset");
    gen->add_option("--out", gen_args.out, "output dataset directory")->required();
    gen->add_option("--classes", gen_args.classes, "number of classes (multiple of 4)")
        ->capture_default_str();
    gen->add_option("--per-class", gen_args.per_class, "images per class")->capture_default_str();
    gen->add_option("--size", gen_args.size, "image side length (multiple of 8)")
        ->capture_default_str();
    gen->add_option("--seed", gen_args.seed, "generator seed")->capture_default_str();
    gen->add_flag("--force", gen_args.force, "overwrite an existing non-empty output directory");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "episodic training on a dataset split");
    train->add_option("--data", train_args.data, "dataset directory")->required();
    train->add_option("--out", train_args.out, "output directory")->required();
    train->add_option("--split", train_args.split, "split index in {0..3}")->capture_default_str();
    train->add_option("--config", train_args.config_path, "config file (key: value sections)");
    train->add_option("--episodes", train_args.cfg.episodes)->capture_default_str();
    train->add_option("--lr0", train_args.cfg.lr0, "initial learning rate")->capture_default_str();
    train->add_option("--momentum", train_args.cfg.momentum)->capture_default_str();
    train->add_option("--weight-decay", train_args.cfg.weight_decay)->capture_default_str();
    train->add_option("--poly-power", train_args.cfg.poly_power)->capture_default_str();
    train->add_option("--batch-size", train_args.cfg.batch_size,
                      "episodes per optimizer step (gradient accumulation)")
        ->capture_default_str();
    train->add_option("--lambda-mcl", train_args.cfg.lambda_mcl,
                      "weight of the multi-class guidance loss")
        ->capture_default_str();
    train->add_option("--seed", train_args.cfg.seed)->capture_default_str();
    train->add_option("--reduction", train_args.reduction, "loss reduction: mean or sum")
        ->capture_default_str();
    train->add_option("--val-interval", train_args.cfg.val_interval)->capture_default_str();
    train->add_option("--val-episodes", train_args.cfg.val_episodes)->capture_default_str();
    train->add_flag("--no-mcl", train_args.no_mcl, "disable multi-class label guidance");
    train->add_flag("--no-pff", train_args.no_pff,
                    "use the single-conv base fusion instead of pyramid fusion");
    train->add_flag("--no-spt", train_args.no_spt, "disable the self-prototype support branch");
    train->add_flag("--freeze-encoder", train_args.freeze_encoder,
                    "train only post-encoder parameters");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "episodic evaluation of a checkpoint");
    eval->add_option("--checkpoint", eval_args.checkpoint)->required();
    eval->add_option("--data", eval_args.data, "dataset directory")->required();
    eval->add_option("--out", eval_args.out, "output directory")->required();
    eval->add_option("--runs", eval_args.cfg.runs)->capture_default_str();
    eval->add_option("--episodes", eval_args.cfg.episodes, "episodes per run")
        ->capture_default_str();
    eval->add_option("--seed", eval_args.cfg.seed)->capture_default_str();
    eval->add_option("--prototype", eval_args.prototype, "support | pseudo | fused")
        ->capture_default_str();
    eval->add_option("--annotation", eval_args.annotation, "dense | scribble | bbox")
        ->capture_default_str();
    eval->add_option("--shots", eval_args.cfg.shots, "support images per episode")
        ->capture_default_str();
    eval->add_flag("--include-pseudo", eval_args.include_pseudo,
                   "k-shot: average the pseudo-prototype with the k support prototypes");
    eval->add_flag("--save-masks", eval_args.save_masks, "export predicted masks as PNG");
    eval->add_flag("--per-episode-average", eval_args.per_episode_average,
                   "average per-episode IoUs instead of split-level accumulation");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "train/eval grids for sensitivity plots");
    sweep->add_option("--data", sweep_args.data)->required();
    sweep->add_option("--out", sweep_args.out)->required();
    sweep->add_option("--mode", sweep_args.mode, "lambda | lrbatch")->capture_default_str();
    sweep->add_option("--split", sweep_args.split)->capture_default_str();
    sweep->add_option("--episodes", sweep_args.episodes, "training episodes per grid point")
        ->capture_default_str();
    sweep->add_option("--eval-episodes", sweep_args.eval_episodes)->capture_default_str();
    sweep->add_option("--seed", sweep_args.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return run_gen(gen_args);
        if (*train) {
            if (!train_args.config_path.empty())
                apply_config_file(TextConfig::load(train_args.config_path), train, train_args);
            return run_train(train_args);
        }
        if (*eval) return run_eval(eval_args);
        if (*sweep) return run_sweep(sweep_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
