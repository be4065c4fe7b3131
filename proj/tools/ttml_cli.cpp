// Command-line front end: gen-data, pretrain, finetune, analyze, bench.
// Config file values (JSON) seed the defaults; explicit flags override them.
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ttml/bench.hpp"
#include "ttml/compression.hpp"
#include "ttml/contrastive.hpp"
#include "ttml/dataset.hpp"
#include "ttml/pipeline.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
    uint64_t seed = 1;
    double tau = 0.5;
    double lr0 = 0.02;
    int64_t decay_steps = 80000;
    double decay_rate = 0.96;
    int freeze_epochs = 50;
    int pretrain_epochs = 100;
    int finetune_epochs = 50;
    int batch = 32;
    int threads = 1;
    int image_size = 256;
    int kernel = 3;
    std::vector<std::vector<int>> encoder_stages = {{1, 29}, {2, 16}};
    bool tensorized = false;
    int64_t bond = 16;
    std::vector<int64_t> in_split = {8, 8};
    std::vector<int64_t> out_split = {64, 64};
    std::vector<double> crop_scale = {0.5, 1.0};
    double brightness = 0.4, contrast = 0.4, saturation = 0.4, flip_prob = 0.5;
    bool single_layer_classifier = false;
    bool stratified_split = true;
    std::string data;
    std::string out_dir = ".";
};

template <typename T>
void maybe(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

RunConfig load_config_file(const std::string& path) {
    RunConfig c;
    if (path.empty()) return c;
    std::ifstream is(path);
    if (!is) throw ttml::DataError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(is);  // strict: no comments, no trailing commas
    } catch (const json::exception& e) {
        throw ttml::UsageError("config: " + path + " is not valid JSON: " + e.what());
    }
    maybe(j, "seed", c.seed);
    maybe(j, "tau", c.tau);
    maybe(j, "lr0", c.lr0);
    maybe(j, "decay_steps", c.decay_steps);
    maybe(j, "decay_rate", c.decay_rate);
    maybe(j, "freeze_epochs", c.freeze_epochs);
    maybe(j, "pretrain_epochs", c.pretrain_epochs);
    maybe(j, "finetune_epochs", c.finetune_epochs);
    maybe(j, "batch", c.batch);
    maybe(j, "threads", c.threads);
    maybe(j, "image_size", c.image_size);
    maybe(j, "kernel", c.kernel);
    maybe(j, "encoder_stages", c.encoder_stages);
    maybe(j, "tensorized", c.tensorized);
    maybe(j, "bond", c.bond);
    maybe(j, "in_split", c.in_split);
    maybe(j, "out_split", c.out_split);
    maybe(j, "crop_scale", c.crop_scale);
    maybe(j, "brightness", c.brightness);
    maybe(j, "contrast", c.contrast);
    maybe(j, "saturation", c.saturation);
    maybe(j, "flip_prob", c.flip_prob);
    maybe(j, "single_layer_classifier", c.single_layer_classifier);
    maybe(j, "stratified_split", c.stratified_split);
    maybe(j, "data", c.data);
    maybe(j, "out_dir", c.out_dir);
    return c;
}

json config_echo(const RunConfig& c) {
    return json{{"seed", c.seed},
                {"tau", c.tau},
                {"lr0", c.lr0},
                {"decay_steps", c.decay_steps},
                {"decay_rate", c.decay_rate},
                {"freeze_epochs", c.freeze_epochs},
                {"pretrain_epochs", c.pretrain_epochs},
                {"finetune_epochs", c.finetune_epochs},
                {"batch", c.batch},
                {"threads", c.threads},
                {"image_size", c.image_size},
                {"kernel", c.kernel},
                {"encoder_stages", c.encoder_stages},
                {"tensorized", c.tensorized},
                {"bond", c.bond},
                {"in_split", c.in_split},
                {"out_split", c.out_split},
                {"crop_scale", c.crop_scale},
                {"brightness", c.brightness},
                {"contrast", c.contrast},
                {"saturation", c.saturation},
                {"flip_prob", c.flip_prob},
                {"single_layer_classifier", c.single_layer_classifier},
                {"stratified_split", c.stratified_split},
                {"data", c.data},
                {"out_dir", c.out_dir}};
}

ttml::TrainConfig train_config(const RunConfig& c) {
    ttml::TrainConfig t;
    t.lr0 = c.lr0;
    t.decay_steps = c.decay_steps;
    t.decay_rate = c.decay_rate;
    t.freeze_epochs = c.freeze_epochs;
    t.pretrain_epochs = c.pretrain_epochs;
    t.finetune_epochs = c.finetune_epochs;
    t.batch = c.batch;
    t.tau = c.tau;
    t.seed = c.seed;
    t.single_layer_classifier = c.single_layer_classifier;
    if (c.crop_scale.size() != 2) throw ttml::UsageError("crop_scale needs two values");
    t.aug.crop_scale_min = float(c.crop_scale[0]);
    t.aug.crop_scale_max = float(c.crop_scale[1]);
    t.aug.brightness = float(c.brightness);
    t.aug.contrast = float(c.contrast);
    t.aug.saturation = float(c.saturation);
    t.aug.flip_prob = float(c.flip_prob);
    return t;
}

ttml::ModelSpec model_spec(const RunConfig& c) {
    ttml::ModelSpec s;
    s.image_size = c.image_size;
    s.encoder.kernel = c.kernel;
    for (const auto& st : c.encoder_stages) {
        if (st.size() != 2) throw ttml::UsageError("encoder_stages entries are [layers, growth]");
        s.encoder.stages.push_back({st[0], st[1]});
    }
    s.tensorized = c.tensorized;
    if (c.in_split.size() != 2 || c.out_split.size() != 2)
        throw ttml::UsageError("in_split/out_split need two factors each");
    s.tt = {c.in_split[0], c.in_split[1], c.out_split[0], c.out_split[1], c.bond};
    s.single_layer_classifier = c.single_layer_classifier;
    return s;
}

void write_metadata(const RunConfig& c, const std::string& command, json extra) {
    std::filesystem::create_directories(c.out_dir);
    json meta;
    meta["command"] = command;
    meta["config"] = config_echo(c);
    meta["threads"] = c.threads;
    meta["conventions"] = {
        {"loss_mean", "mean over all 2N directed pairs"},
        {"lr_schedule", "continuous exponential decay"},
        {"split", c.stratified_split ? "stratified per class" : "global"},
        {"timing_basis", "per iteration"},
    };
    meta.update(extra);
    const auto path = std::filesystem::path(c.out_dir) / "run_metadata.json";
    std::ofstream os(path);
    if (!os) throw ttml::DataError("cannot write " + path.string());
    os << meta.dump(2) << "\n";
    std::cout << "metadata: " << path.string() << "\n";
}

// Adds the shared tunables to a subcommand, with defaults taken from the
// (possibly config-file-initialized) RunConfig.
void add_common_flags(CLI::App* cmd, RunConfig& c, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--seed", c.seed, "master rng seed")->capture_default_str();
    cmd->add_option("--tau", c.tau, "contrastive temperature")->capture_default_str();
    cmd->add_option("--lr0", c.lr0, "initial learning rate")->capture_default_str();
    cmd->add_option("--decay-steps", c.decay_steps, "learning-rate decay steps")
        ->capture_default_str();
    cmd->add_option("--decay-rate", c.decay_rate, "learning-rate decay rate")
        ->capture_default_str();
    cmd->add_option("--freeze-epochs", c.freeze_epochs, "epochs with the encoder frozen")
        ->capture_default_str();
    cmd->add_option("--epochs", c.pretrain_epochs, "contrastive pretraining epochs")
        ->capture_default_str();
    cmd->add_option("--finetune-epochs", c.finetune_epochs, "supervised epochs")
        ->capture_default_str();
    cmd->add_option("--batch", c.batch, "images per step")->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker threads for contractions")
        ->capture_default_str();
    cmd->add_option("--image-size", c.image_size, "square input size")->capture_default_str();
    cmd->add_option("--kernel", c.kernel, "encoder conv kernel extent")->capture_default_str();
    cmd->add_flag("--tensorized,!--no-tensorized", c.tensorized,
                  "factorize the first projection layer");
    cmd->add_option("--bond", c.bond, "tensor-train bond dimension")->capture_default_str();
    cmd->add_option("--in-split", c.in_split, "input split a,b")
        ->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--out-split", c.out_split, "output split c,d")
        ->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--crop-scale", c.crop_scale, "crop area fraction range min,max")
        ->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--brightness", c.brightness, "brightness jitter strength")
        ->capture_default_str();
    cmd->add_option("--contrast", c.contrast, "contrast jitter strength")
        ->capture_default_str();
    cmd->add_option("--saturation", c.saturation, "saturation jitter strength")
        ->capture_default_str();
    cmd->add_option("--flip-prob", c.flip_prob, "horizontal flip probability")
        ->capture_default_str();
    cmd->add_flag("--single-layer-classifier", c.single_layer_classifier,
                  "use one dense layer instead of two for the classifier head");
    cmd->add_flag("--stratified-split,!--global-split", c.stratified_split,
                  "stratify the 80:20 split per class");
    cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
}

std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return "";
}

json epochs_json(const std::vector<ttml::EpochStat>& stats, bool with_val) {
    json arr = json::array();
    for (const auto& e : stats) {
        json j{{"loss", e.loss}, {"wall_s", e.wall_s}};
        if (with_val && e.val_top1 >= 0) j["val_top1"] = e.val_top1;
        arr.push_back(j);
    }
    return arr;
}

// Paths inside a run bundle are recorded relative to the run directory.
void write_manifest(const ttml::Dataset& ds, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    ttml::Dataset relative = ds;  // samples share pixel buffers; paths are rewritten
    for (auto& s : relative.samples)
        s.path = std::filesystem::proximate(s.path, out_dir).string();
    const auto path = out_dir / "dataset_manifest.csv";
    std::ofstream os(path);
    if (!os) throw ttml::DataError("cannot write " + path.string());
    ttml::write_manifest_csv(relative, os);
}

int run_pretrain(const RunConfig& c) {
    ttml::set_num_threads(c.threads);
    if (c.data.empty()) throw ttml::UsageError("pretrain: --data is required");
    const ttml::Dataset ds = ttml::load_dataset(c.data, c.image_size);
    std::cout << "loaded " << ds.size() << " images (" << c.image_size << "x" << c.image_size
              << ")\n";
    write_manifest(ds, c.out_dir);
    ttml::Model model = ttml::build_model(model_spec(c), c.seed);
    std::cout << (c.tensorized ? "tensorized" : "general") << " model, "
              << model.param_count() << " parameters\n";
    const ttml::TrainConfig tc = train_config(c);
    const ttml::PretrainResult res = ttml::pretrain(model, ds, tc);
    for (size_t e = 0; e < res.epochs.size(); ++e)
        std::cout << "epoch " << e + 1 << "/" << res.epochs.size() << " loss "
                  << res.epochs[e].loss << " (" << res.epochs[e].wall_s << " s)\n";
    std::filesystem::create_directories(c.out_dir);
    const auto ckpt = std::filesystem::path(c.out_dir) / "pretrained.ckpt";
    ttml::save_model(model, ckpt);
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    write_metadata(c, "pretrain",
                   json{{"epochs", epochs_json(res.epochs, false)},
                        {"steps", res.steps},
                        {"param_count", model.param_count()},
                        {"artifacts",
                         {{"checkpoint", "pretrained.ckpt"},
                          {"manifest", "dataset_manifest.csv"}}}});
    return 0;
}

int run_finetune(const RunConfig& c, const std::string& checkpoint) {
    ttml::set_num_threads(c.threads);
    if (c.data.empty()) throw ttml::UsageError("finetune: --data is required");
    ttml::Model model = ttml::load_model(checkpoint);
    const ttml::Dataset ds = ttml::load_dataset(c.data, model.spec.image_size);
    write_manifest(ds, c.out_dir);
    auto [train, val] = ttml::split_80_20(ds, c.seed, c.stratified_split);
    std::cout << "split " << train.size() << " train / " << val.size() << " validation\n";
    if (!model.snipped) {
        std::cout << "checkpoint is unsnipped; snipping projection head and attaching "
                     "classifier\n";
        ttml::snip_and_attach(model, c.single_layer_classifier, c.seed);
    }
    const ttml::TrainConfig tc = train_config(c);
    const ttml::FinetuneResult res = ttml::finetune(model, train, val, tc);
    for (size_t e = 0; e < res.epochs.size(); ++e)
        std::cout << "epoch " << e + 1 << "/" << res.epochs.size() << " loss "
                  << res.epochs[e].loss << " val_top1 " << res.epochs[e].val_top1 << " ("
                  << res.epochs[e].wall_s << " s)\n";
    std::cout << "final train top1 " << res.final_train_top1 << "\n";
    std::filesystem::create_directories(c.out_dir);
    const auto ckpt = std::filesystem::path(c.out_dir) / "finetuned.ckpt";
    ttml::save_model(model, ckpt);
    std::cout << "checkpoint: " << ckpt.string() << "\n";
    write_metadata(c, "finetune",
                   json{{"epochs", epochs_json(res.epochs, true)},
                        {"final_train_top1", res.final_train_top1},
                        {"source_checkpoint",
                         std::filesystem::proximate(checkpoint, c.out_dir).string()},
                        {"artifacts",
                         {{"checkpoint", "finetuned.ckpt"},
                          {"manifest", "dataset_manifest.csv"}}}});
    return 0;
}

int run_analyze(const RunConfig& c, const std::vector<int64_t>& bonds, bool include_bias,
                int64_t encoder_params, int64_t flatten_dim, bool splits_given) {
    ttml::CompressionAssumptions a;
    a.encoder_params = encoder_params;
    a.flatten_dim = flatten_dim;
    if (splits_given) {
        a.in_split_a = c.in_split[0];
        a.in_split_b = c.in_split[1];
        a.out_split_c = c.out_split[0];
        a.out_split_d = c.out_split[1];
    }
    a.include_bias = include_bias;
    std::vector<ttml::CompressionReport> sweep;
    for (int64_t bond : bonds) sweep.push_back(ttml::model_reduction(a, bond));

    ttml::write_compression_text(sweep, std::cout);
    std::filesystem::create_directories(c.out_dir);
    const auto csv_path = std::filesystem::path(c.out_dir) / "analyze.csv";
    const auto json_path = std::filesystem::path(c.out_dir) / "analyze.json";
    {
        std::ofstream os(csv_path);
        ttml::write_compression_csv(sweep, os);
    }
    {
        std::ofstream os(json_path);
        os << ttml::compression_json(sweep).dump(2) << "\n";
    }
    std::cout << "\nreports: " << csv_path.string() << ", " << json_path.string() << "\n";
    write_metadata(c, "analyze",
                   json{{"bonds", bonds},
                        {"artifacts", {"analyze.csv", "analyze.json"}}});
    return 0;
}

int run_bench(const RunConfig& c, const std::string& mode, const std::vector<int64_t>& batches,
              int repeats, int warmup, const std::vector<std::string>& formats) {
    ttml::set_num_threads(c.threads);
    ttml::BenchReport rep;
    if (mode == "layer") {
        ttml::TTDenseSpec spec{c.in_split[0], c.in_split[1], c.out_split[0], c.out_split[1],
                               c.bond};
        rep = ttml::bench_layer(spec, batches, repeats, warmup, c.seed);
    } else if (mode == "training") {
        if (c.data.empty()) throw ttml::UsageError("bench --mode training: --data is required");
        const ttml::Dataset ds = ttml::load_dataset(c.data, c.image_size);
        rep = ttml::bench_training(model_spec(c), train_config(c), ds, batches, repeats,
                                   warmup);
    } else {
        throw ttml::UsageError("bench: --mode must be 'layer' or 'training'");
    }

    for (const auto& row : rep.rows)
        if (row.variant == "tt") {
            uint64_t dense_flops = 0;
            for (const auto& base : rep.rows)
                if (base.variant == "dense" && base.batch == row.batch)
                    dense_flops = base.flops;
            std::cout << "batch " << row.batch << ": speedup " << row.speedup * 100.0
                      << "% (flops predict tt "
                      << (row.flops < dense_flops ? "faster" : "slower") << ")\n";
        }
    std::filesystem::create_directories(c.out_dir);
    json artifacts = json::array();
    for (const auto& fmt : formats) {
        const std::string name = "bench_" + mode + "." + fmt;
        const auto path = std::filesystem::path(c.out_dir) / name;
        ttml::emit_report(rep, fmt, path);
        std::cout << "report: " << path.string() << "\n";
        artifacts.push_back(name);
    }
    write_metadata(c, "bench",
                   json{{"mode", mode},
                        {"batches", batches},
                        {"repeats", repeats},
                        {"warmup", warmup},
                        {"artifacts", artifacts}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor-train factorized contrastive training toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    try {
        cfg = load_config_file(find_config_arg(argc, argv));
    } catch (const ttml::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ttml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::string config_path;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset tree");
    std::string gen_out = "synthetic";
    int per_class = 20, gen_size = 64;
    uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--per-class", per_class, "images per class")->capture_default_str();
    gen->add_option("--size", gen_size, "square image size (>= 8)")->capture_default_str();
    gen->add_option("--seed", gen_seed, "rng seed")->capture_default_str();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "contrastive pretraining");
    pre->add_option("--data", cfg.data, "dataset root directory");
    add_common_flags(pre, cfg, config_path);

    // finetune
    auto* fin = app.add_subcommand("finetune", "supervised fine-tuning on a checkpoint");
    std::string checkpoint;
    fin->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
    fin->add_option("--data", cfg.data, "dataset root directory");
    add_common_flags(fin, cfg, config_path);

    // analyze
    auto* ana = app.add_subcommand("analyze", "parameter-reduction accounting");
    std::vector<int64_t> bonds = {16, 32, 64, 128, 256};
    bool include_bias = false;
    int64_t encoder_params = 8'000'000, flatten_dim = 65'536;
    ana->add_option("--bonds", bonds, "bond dimensions to sweep")
        ->delimiter(',')->capture_default_str();
    ana->add_option("--encoder-params", encoder_params, "assumed encoder parameter count")
        ->capture_default_str();
    ana->add_option("--flatten-dim", flatten_dim, "assumed flattened feature dimension")
        ->capture_default_str();
    ana->add_flag("--include-bias", include_bias, "count biases in reduction rates");
    add_common_flags(ana, cfg, config_path);

    // bench
    auto* ben = app.add_subcommand("bench", "wall-clock benchmarking");
    std::string mode = "layer";
    std::vector<int64_t> batches = {8, 16, 32};
    int repeats = 7, warmup = 2;
    std::vector<std::string> formats = {"csv", "json", "svg"};
    ben->add_option("--mode", mode, "layer or training")->capture_default_str();
    ben->add_option("--batches", batches, "batch sizes to sweep")
        ->delimiter(',')->capture_default_str();
    ben->add_option("--repeats", repeats, "timed repeats per point (>= 5)")
        ->capture_default_str();
    ben->add_option("--warmup", warmup, "warmup iterations (>= 1)")->capture_default_str();
    ben->add_option("--formats", formats, "report formats: csv,json,svg")
        ->delimiter(',')->capture_default_str();
    ben->add_option("--data", cfg.data, "dataset root (training mode)");
    add_common_flags(ben, cfg, config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            ttml::gen_synthetic(gen_out, per_class, gen_size, gen_seed);
            std::cout << "wrote " << 11 * per_class << " files under " << gen_out << "\n";
            return 0;
        }
        if (*pre) return run_pretrain(cfg);
        if (*fin) return run_finetune(cfg, checkpoint);
        if (*ana)
            return run_analyze(cfg, bonds, include_bias, encoder_params, flatten_dim,
                               ana->count("--in-split") > 0 || ana->count("--out-split") > 0);
        if (*ben) return run_bench(cfg, mode, batches, repeats, warmup, formats);
    } catch (const ttml::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ttml::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
