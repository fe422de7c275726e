// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single command-line entry point for the whole pipeline: dataset
// generation, training, evaluation, proposal extraction, occlusion
// analysis, feature export, and the 64-bit gradient suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccnn/ccnn.hpp"
#include "ccnn/gradsuite.hpp"

namespace fs = std::filesystem;
using namespace ccnn;

namespace {

/// Bad invocation (unknown flag handled by CLI11; missing paths here): exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_dir(const std::string& path, const char* what) {
    if (!fs::is_directory(path))
        throw UsageError(std::string(what) + " directory '" + path + "' does not exist");
}

void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path))
        throw UsageError(std::string(what) + " file '" + path + "' does not exist");
}

std::string g9(double v) { return detail::format_g(v); }

// ---------------------------------------------------------------------------
// Options shared by model-consuming subcommands.
// ---------------------------------------------------------------------------

struct CommonOpts {
    std::string dataset;
    std::string config;
    std::string variant = "base";
    std::string proposal = "oracle";
    int num_boxes = 10;
    int pooled = 7;
    int hidden1 = 128;
    int hidden2 = 64;
    long seed = 0;
    std::string out;
    int threads = 1;
};

void add_model_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--variant", o.variant, "Model kind")
        ->check(CLI::IsMember({"base", "last_step", "dense_replace", "plain_cnn"}));
    cmd->add_option("--num-boxes", o.num_boxes, "Boxes fed per image (LSTM timesteps)");
    cmd->add_option("--pooled-size", o.pooled, "RoI pooled grid side");
    cmd->add_option("--hidden1", o.hidden1, "First LSTM layer width");
    cmd->add_option("--hidden2", o.hidden2, "Second LSTM layer width");
}

void add_common_tail(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "Root seed; all randomness derives from it");
    cmd->add_option("--threads", o.threads, "Intra-op worker threads (1 = bit-exact)");
}

/// Keys that let a checkpoint be rebuilt without guessing shapes.
ModelConfig model_config_from_kv(const KvConfig& kv) {
    ModelConfig cfg;
    cfg.kind = variant_from_name(kv.get_string("variant", "base"));
    cfg.backbone.input_size = static_cast<int>(kv.get_long("image_size", 64));
    cfg.num_boxes = static_cast<int>(kv.get_long("num_boxes", 10));
    cfg.pooled = static_cast<int>(kv.get_long("pooled_size", 7));
    cfg.hidden1 = static_cast<int>(kv.get_long("hidden1", 128));
    cfg.hidden2 = static_cast<int>(kv.get_long("hidden2", 64));
    cfg.dense_width = static_cast<int>(kv.get_long("dense_width", 128));
    cfg.num_classes = static_cast<int>(kv.get_long("num_classes", 4));
    return cfg;
}

Model<float> load_model(const std::string& checkpoint_path, const std::string& config_path) {
    require_file(checkpoint_path, "checkpoint");
    std::string cfg_path = config_path;
    if (cfg_path.empty()) {
        cfg_path = (fs::path(checkpoint_path).parent_path() / "run.cfg").string();
        if (!fs::is_regular_file(cfg_path))
            throw UsageError("no --config given and no run.cfg next to '" + checkpoint_path +
                             "'");
    } else {
        require_file(cfg_path, "config");
    }
    const KvConfig kv = KvConfig::load(cfg_path);
    Model<float> model = Model<float>::init(model_config_from_kv(kv), 0);
    restore_named(load_checkpoint(checkpoint_path), model.named_params(),
                  "load '" + checkpoint_path + "'");
    return model;
}

std::vector<std::vector<Box>> proposals_for(const Dataset& data, const std::string& mode,
                                            int num_boxes, uint64_t seed) {
    return make_proposals(data.samples, proposal_mode_from_name(mode), num_boxes,
                          Rng::child_of(seed, "eval-proposals").next_u64());
}

// ---------------------------------------------------------------------------
// scenegen
// ---------------------------------------------------------------------------

struct ScenegenOpts {
    std::string out;
    int count = 1000;
    long seed = 0;
    // Flag defaults come from SceneSpec so a flagless scenegen run writes
    // the same dataset the library generates in-process.
    int image_size = SceneSpec{}.image_size;
    double noise = SceneSpec{}.noise;
    int distractor_min = SceneSpec{}.distractor_min;
    int distractor_max = SceneSpec{}.distractor_max;
    int threads = 1;
};

int run_scenegen(const ScenegenOpts& o) {
    SceneSpec spec;
    spec.image_size = o.image_size;
    spec.noise = o.noise;
    spec.distractor_min = o.distractor_min;
    spec.distractor_max = o.distractor_max;
    spec.seed = static_cast<uint64_t>(o.seed);
    spec.validate();

    const Dataset data = generate_dataset(spec, o.count);
    write_dataset(data, o.out);

    KvConfig echo;
    echo.set_long("format_version", 1);
    echo.set("command", "scenegen");
    echo.set_long("count", o.count);
    echo.set_long("seed", o.seed);
    echo.set_long("image_size", o.image_size);
    echo.set_double("noise", o.noise);
    echo.set_long("distractor_min", o.distractor_min);
    echo.set_long("distractor_max", o.distractor_max);
    echo.save((fs::path(o.out) / "run.cfg").string());

    std::cout << "wrote " << data.samples.size() << " samples to " << o.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCliOpts {
    CommonOpts common;
    std::string val_dataset;
    double lr = 2e-3, decay = 2e-3, momentum = 0.9;
    long batch_size = 16, iterations = 625;
    long phase2_at = 0;
    double phase2_lr = 1e-4, phase2_decay = 1e-3;
    double oracle_jitter = 0.0;
    long eval_every = 0;
};

int run_train(const TrainCliOpts& o, const std::vector<CLI::Option*>& explicit_flags) {
    require_dir(o.common.dataset, "dataset");
    if (!o.common.out.empty()) fs::create_directories(o.common.out);
    if (o.common.out.empty()) throw UsageError("train needs --out");

    // Precedence: built-in defaults < config file < explicit flags.
    TrainCliOpts eff = o;
    if (!o.common.config.empty()) {
        require_file(o.common.config, "config");
        const KvConfig kv = KvConfig::load(o.common.config);
        auto overridden = [&](const char* flag) {
            for (const CLI::Option* opt : explicit_flags)
                if (opt->check_name(flag) && opt->count() > 0) return true;
            return false;
        };
        if (!overridden("--seed")) eff.common.seed = kv.get_long("seed", eff.common.seed);
        if (!overridden("--variant"))
            eff.common.variant = kv.get_string("variant", eff.common.variant);
        if (!overridden("--proposal"))
            eff.common.proposal = kv.get_string("proposal_mode", eff.common.proposal);
        if (!overridden("--num-boxes"))
            eff.common.num_boxes =
                static_cast<int>(kv.get_long("num_boxes", eff.common.num_boxes));
        if (!overridden("--pooled-size"))
            eff.common.pooled = static_cast<int>(kv.get_long("pooled_size", eff.common.pooled));
        if (!overridden("--hidden1"))
            eff.common.hidden1 = static_cast<int>(kv.get_long("hidden1", eff.common.hidden1));
        if (!overridden("--hidden2"))
            eff.common.hidden2 = static_cast<int>(kv.get_long("hidden2", eff.common.hidden2));
        eff.lr = kv.get_double("lr", eff.lr);
        eff.decay = kv.get_double("decay", eff.decay);
        eff.momentum = kv.get_double("momentum", eff.momentum);
        eff.batch_size = kv.get_long("batch_size", eff.batch_size);
        eff.iterations = kv.get_long("iterations", eff.iterations);
        eff.phase2_at = kv.get_long("phase2_at", eff.phase2_at);
        eff.phase2_lr = kv.get_double("phase2_lr", eff.phase2_lr);
        eff.phase2_decay = kv.get_double("phase2_decay", eff.phase2_decay);
        eff.oracle_jitter = kv.get_double("oracle_jitter", eff.oracle_jitter);
        eff.eval_every = kv.get_long("eval_every", eff.eval_every);
    }

    Dataset train_data = read_dataset(o.common.dataset);
    Dataset val_data;
    if (!o.val_dataset.empty()) {
        require_dir(o.val_dataset, "validation dataset");
        val_data = read_dataset(o.val_dataset);
    } else {
        // No separate split given: hold out the last 20%.
        val_data.spec = train_data.spec;
        val_data.spec_loaded = train_data.spec_loaded;
        const std::size_t cut = train_data.samples.size() -
                                std::max<std::size_t>(1, train_data.samples.size() / 5);
        val_data.samples.assign(train_data.samples.begin() + static_cast<long>(cut),
                                train_data.samples.end());
        train_data.samples.resize(cut);
    }
    if (train_data.samples.empty() || val_data.samples.empty())
        throw UsageError("train/validation split came out empty");

    TrainOptions topts;
    topts.model.kind = variant_from_name(eff.common.variant);
    topts.model.backbone.input_size = train_data.samples[0].image.dim(1);
    topts.model.num_boxes = eff.common.num_boxes;
    topts.model.pooled = eff.common.pooled;
    topts.model.hidden1 = eff.common.hidden1;
    topts.model.hidden2 = eff.common.hidden2;
    topts.model.num_classes = train_data.spec.num_classes;
    topts.lr = eff.lr;
    topts.decay = eff.decay;
    topts.momentum = eff.momentum;
    topts.batch_size = static_cast<int>(eff.batch_size);
    topts.iterations = eff.iterations;
    topts.phase2_at = eff.phase2_at;
    topts.phase2_lr = eff.phase2_lr;
    topts.phase2_decay = eff.phase2_decay;
    topts.seed = static_cast<uint64_t>(eff.common.seed);
    topts.proposal = proposal_mode_from_name(eff.common.proposal);
    topts.oracle_jitter = eff.oracle_jitter;
    topts.eval_every = eff.eval_every;

    KvConfig echo;
    echo.set_long("format_version", 1);
    echo.set("command", "train");
    echo.set("variant", eff.common.variant);
    echo.set("proposal_mode", eff.common.proposal);
    echo.set("dataset", o.common.dataset);
    echo.set("val_dataset", o.val_dataset);
    echo.set_long("image_size", topts.model.backbone.input_size);
    echo.set_long("num_classes", topts.model.num_classes);
    echo.set_long("num_boxes", topts.model.num_boxes);
    echo.set_long("pooled_size", topts.model.pooled);
    echo.set_long("hidden1", topts.model.hidden1);
    echo.set_long("hidden2", topts.model.hidden2);
    echo.set_long("dense_width", topts.model.dense_width);
    echo.set_double("lr", topts.lr);
    echo.set_double("decay", topts.decay);
    echo.set_double("momentum", topts.momentum);
    echo.set_long("batch_size", topts.batch_size);
    echo.set_long("iterations", topts.iterations);
    echo.set_long("phase2_at", topts.phase2_at);
    echo.set_double("phase2_lr", topts.phase2_lr);
    echo.set_double("phase2_decay", topts.phase2_decay);
    echo.set_long("seed", eff.common.seed);
    echo.set_double("oracle_jitter", topts.oracle_jitter);
    echo.set_double("nms_iou", topts.nms_iou);
    echo.set_long("threads", o.common.threads);
    echo.save((fs::path(o.common.out) / "run.cfg").string());

    std::ofstream log((fs::path(o.common.out) / "train_log.csv").string(), std::ios::trunc);
    if (!log) throw IoError("cannot open train_log.csv in '" + o.common.out + "'");
    TrainResult result = train_model(train_data, val_data, topts, &log);

    save_checkpoint((fs::path(o.common.out) / "model.ckpt").string(),
                    result.model.named_params());
    std::cout << "final_val_accuracy," << g9(result.final_val_accuracy) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string proposal_override;
};

int run_eval(const EvalOpts& o) {
    require_dir(o.common.dataset, "dataset");
    Model<float> model = load_model(o.checkpoint, o.common.config);
    const Dataset data = read_dataset(o.common.dataset);

    std::string cfg_path = o.common.config.empty()
                               ? (fs::path(o.checkpoint).parent_path() / "run.cfg").string()
                               : o.common.config;
    const KvConfig kv = KvConfig::load(cfg_path);
    const std::string mode = !o.proposal_override.empty()
                                 ? o.proposal_override
                                 : kv.get_string("proposal_mode", "oracle");
    const uint64_t seed = static_cast<uint64_t>(kv.get_long("seed", o.common.seed));

    std::vector<std::vector<Box>> props;
    if (model.uses_boxes()) props = proposals_for(data, mode, model.cfg.num_boxes, seed);
    const EvalResult r = evaluate(model, data.samples, props);

    std::cout << "accuracy," << g9(r.accuracy) << "\n";
    for (const auto& row : r.confusion) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) std::cout << ",";
            std::cout << row[j];
        }
        std::cout << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// propose
// ---------------------------------------------------------------------------

struct ProposeOpts {
    std::string image;
    std::string dataset;
    long index = 0;
    std::string proposal = "objectness";
    int num_boxes = 10;
    double nms_iou = 0.3;
    long seed = 0;
    int threads = 1;
};

int run_propose(const ProposeOpts& o) {
    std::vector<Box> boxes;
    if (!o.image.empty()) {
        require_file(o.image, "image");
        Tensor<float> img = read_pnm(o.image);
        if (img.dim(0) != 1)
            throw UsageError("propose needs a grayscale image, got " + shape_str(img.shape()));
        boxes = objectness_proposals(img, o.num_boxes, o.nms_iou);
    } else if (!o.dataset.empty()) {
        require_dir(o.dataset, "dataset");
        const Dataset data = read_dataset(o.dataset);
        if (o.index < 0 || o.index >= static_cast<long>(data.samples.size()))
            throw UsageError("--index " + std::to_string(o.index) + " outside dataset of " +
                             std::to_string(data.samples.size()));
        const SceneSample& s = data.samples[static_cast<std::size_t>(o.index)];
        const auto all = make_proposals({s}, proposal_mode_from_name(o.proposal), o.num_boxes,
                                        static_cast<uint64_t>(o.seed), 0.0, o.nms_iou);
        boxes = all[0];
    } else {
        throw UsageError("propose needs --image or --dataset");
    }
    for (const Box& b : boxes)
        std::cout << g9(b.x0) << " " << g9(b.y0) << " " << g9(b.x1) << " " << g9(b.y1) << " "
                  << g9(b.score) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// obscure
// ---------------------------------------------------------------------------

struct ObscureOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string proposal_override;
};

int run_obscure(const ObscureOpts& o) {
    require_dir(o.common.dataset, "dataset");
    if (o.common.out.empty()) throw UsageError("obscure needs --out");
    Model<float> model = load_model(o.checkpoint, o.common.config);
    const Dataset data = read_dataset(o.common.dataset);

    std::string cfg_path = o.common.config.empty()
                               ? (fs::path(o.checkpoint).parent_path() / "run.cfg").string()
                               : o.common.config;
    const KvConfig kv = KvConfig::load(cfg_path);
    const std::string mode = !o.proposal_override.empty()
                                 ? o.proposal_override
                                 : kv.get_string("proposal_mode", "oracle");
    const uint64_t seed = static_cast<uint64_t>(kv.get_long("seed", o.common.seed));

    const auto props = proposals_for(data, mode, model.cfg.num_boxes, seed);
    const ObscurationReport report = timestep_degradation(model, data.samples, props);
    write_obscuration_outputs(report, o.common.out);

    KvConfig echo;
    echo.set_long("format_version", 1);
    echo.set("command", "obscure");
    echo.set("dataset", o.common.dataset);
    echo.set("checkpoint", o.checkpoint);
    echo.set("proposal_mode", mode);
    echo.set_long("seed", static_cast<long>(seed));
    echo.save((fs::path(o.common.out) / "run.cfg").string());

    std::cout << "baseline_accuracy," << g9(report.baseline_accuracy) << "\n";
    for (std::size_t t = 0; t < report.curve.size(); ++t)
        std::cout << t << "," << g9(report.curve[t]) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// export-features
// ---------------------------------------------------------------------------

struct ExportOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string stage = "roi_cnn";
    int timestep = -1;
};

int run_export(const ExportOpts& o) {
    require_dir(o.common.dataset, "dataset");
    if (o.common.out.empty()) throw UsageError("export-features needs --out");
    Model<float> model = load_model(o.checkpoint, o.common.config);
    const Dataset data = read_dataset(o.common.dataset);

    std::string cfg_path = o.common.config.empty()
                               ? (fs::path(o.checkpoint).parent_path() / "run.cfg").string()
                               : o.common.config;
    const KvConfig kv = KvConfig::load(cfg_path);
    const std::string mode = kv.get_string("proposal_mode", "oracle");
    const uint64_t seed = static_cast<uint64_t>(kv.get_long("seed", o.common.seed));

    const auto props = proposals_for(data, mode, model.cfg.num_boxes, seed);
    const FeatureStage stage =
        o.stage == "roi_cnn" ? FeatureStage::RoiCnn : FeatureStage::LstmT;
    const auto rows = export_features(model, data.samples, props, stage, o.timestep);

    fs::create_directories(o.common.out);
    write_csv_rows((fs::path(o.common.out) / "features.csv").string(), rows);

    KvConfig echo;
    echo.set_long("format_version", 1);
    echo.set("command", "export-features");
    echo.set("dataset", o.common.dataset);
    echo.set("checkpoint", o.checkpoint);
    echo.set("stage", o.stage);
    echo.set_long("timestep", o.timestep);
    echo.set_long("seed", static_cast<long>(seed));
    echo.save((fs::path(o.common.out) / "run.cfg").string());

    std::cout << "wrote " << rows.size() << " rows\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int run_gradcheck() {
    const auto results = run_gradient_suite();
    double worst = 0;
    for (const auto& [name, err] : results) {
        std::cout << name << " " << g9(err) << "\n";
        worst = std::max(worst, err);
    }
    std::cout << "worst " << g9(worst) << "\n";
    return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scene classification via confidence-ranked object boxes and an LSTM context "
                 "model"};
    app.require_subcommand(1);

    ScenegenOpts sg;
    CLI::App* scenegen = app.add_subcommand("scenegen", "Generate a synthetic scene dataset");
    scenegen->add_option("--out", sg.out, "Output dataset directory")->required();
    scenegen->add_option("--count", sg.count, "Number of samples");
    scenegen->add_option("--seed", sg.seed, "Base seed (per-sample seed = base + index)");
    scenegen->add_option("--image-size", sg.image_size, "Square image side in pixels");
    scenegen->add_option("--noise", sg.noise, "Background noise amplitude");
    scenegen->add_option("--distractors-min", sg.distractor_min, "Minimum distractor count");
    scenegen->add_option("--distractors-max", sg.distractor_max, "Maximum distractor count");
    scenegen->add_option("--threads", sg.threads, "Worker threads");

    TrainCliOpts tr;
    CLI::App* train = app.add_subcommand("train", "Train a model");
    std::vector<CLI::Option*> train_flags;
    train->add_option("--dataset", tr.common.dataset, "Training dataset directory")->required();
    train->add_option("--val-dataset", tr.val_dataset,
                      "Validation dataset directory (default: 20% holdout)");
    train_flags.push_back(train->add_option("--variant", tr.common.variant, "Model kind")
                              ->check(CLI::IsMember(
                                  {"base", "last_step", "dense_replace", "plain_cnn"})));
    train_flags.push_back(train->add_option("--proposal", tr.common.proposal, "Box source")
                              ->check(CLI::IsMember({"objectness", "oracle", "random"})));
    train_flags.push_back(
        train->add_option("--num-boxes", tr.common.num_boxes, "Boxes per image"));
    train_flags.push_back(
        train->add_option("--pooled-size", tr.common.pooled, "RoI pooled grid side"));
    train_flags.push_back(train->add_option("--hidden1", tr.common.hidden1, "LSTM layer 1 width"));
    train_flags.push_back(train->add_option("--hidden2", tr.common.hidden2, "LSTM layer 2 width"));
    train->add_option("--config", tr.common.config, "key=value training config file");
    train_flags.push_back(train->add_option("--seed", tr.common.seed, "Root seed"));
    train->add_option("--out", tr.common.out, "Output directory")->required();
    train->add_option("--threads", tr.common.threads, "Worker threads");
    train->add_option("--iterations", tr.iterations, "Total SGD iterations");
    train->add_option("--batch-size", tr.batch_size, "Batch size");
    train->add_option("--lr", tr.lr, "Initial learning rate");

    EvalOpts ev;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--dataset", ev.common.dataset, "Dataset directory")->required();
    eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    eval->add_option("--config", ev.common.config,
                     "run.cfg describing the model (default: next to checkpoint)");
    eval->add_option("--proposal", ev.proposal_override, "Override box source")
        ->check(CLI::IsMember({"objectness", "oracle", "random"}));
    add_common_tail(eval, ev.common);

    ProposeOpts pr;
    CLI::App* propose = app.add_subcommand("propose", "Emit ranked boxes for an image");
    propose->add_option("--image", pr.image, "PGM image file (objectness scoring)");
    propose->add_option("--dataset", pr.dataset, "Dataset directory (with --index)");
    propose->add_option("--index", pr.index, "Sample index within --dataset");
    propose->add_option("--proposal", pr.proposal, "Box source for dataset mode")
        ->check(CLI::IsMember({"objectness", "oracle", "random"}));
    propose->add_option("--num-boxes", pr.num_boxes, "Number of boxes");
    propose->add_option("--nms", pr.nms_iou, "NMS IoU threshold");
    propose->add_option("--seed", pr.seed, "Seed for oracle/random modes");
    propose->add_option("--threads", pr.threads, "Worker threads");

    ObscureOpts ob;
    CLI::App* obscure = app.add_subcommand("obscure", "Occlusion significance analysis");
    obscure->add_option("--dataset", ob.common.dataset, "Dataset directory")->required();
    obscure->add_option("--checkpoint", ob.checkpoint, "Checkpoint file")->required();
    obscure->add_option("--config", ob.common.config, "run.cfg describing the model");
    obscure->add_option("--proposal", ob.proposal_override, "Override box source")
        ->check(CLI::IsMember({"objectness", "oracle", "random"}));
    obscure->add_option("--out", ob.common.out, "Output directory")->required();
    add_common_tail(obscure, ob.common);

    ExportOpts ex;
    CLI::App* exportf = app.add_subcommand("export-features", "Dump per-box feature vectors");
    exportf->add_option("--dataset", ex.common.dataset, "Dataset directory")->required();
    exportf->add_option("--checkpoint", ex.checkpoint, "Checkpoint file")->required();
    exportf->add_option("--config", ex.common.config, "run.cfg describing the model");
    exportf->add_option("--stage", ex.stage, "Feature stage")
        ->check(CLI::IsMember({"roi_cnn", "lstm_t"}));
    exportf->add_option("--timestep", ex.timestep, "0-based timestep for lstm_t");
    exportf->add_option("--out", ex.common.out, "Output directory")->required();
    add_common_tail(exportf, ex.common);

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Run the 64-bit gradient suite");
    int gradcheck_threads = 1;
    gradcheck->add_option("--threads", gradcheck_threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (scenegen->parsed()) {
            set_num_threads(sg.threads);
            return run_scenegen(sg);
        }
        if (train->parsed()) {
            set_num_threads(tr.common.threads);
            return run_train(tr, train_flags);
        }
        if (eval->parsed()) {
            set_num_threads(ev.common.threads);
            return run_eval(ev);
        }
        if (propose->parsed()) {
            set_num_threads(pr.threads);
            return run_propose(pr);
        }
        if (obscure->parsed()) {
            set_num_threads(ob.common.threads);
            return run_obscure(ob);
        }
        if (exportf->parsed()) {
            set_num_threads(ex.common.threads);
            return run_export(ex);
        }
        if (gradcheck->parsed()) {
            set_num_threads(gradcheck_threads);
            return run_gradcheck();
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
