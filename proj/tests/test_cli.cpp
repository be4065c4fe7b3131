#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(TTML_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) out += buf;
    const int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("ttml_cli_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

uint64_t tree_hash(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    uint64_t h = 1469598103934665603ull;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        char c;
        while (is.get(c)) h = (h ^ uint8_t(c)) * 1099511628211ull;
    }
    return h;
}

size_t count_files(const fs::path& root) {
    size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) ++n;
    return n;
}

}  // namespace

TEST_CASE("gen-data writes 11 x per-class files, reruns bitwise, rejects tiny sizes") {
    const fs::path out1 = temp_dir("gen1");
    auto r = run("gen-data --out " + out1.string() + " --per-class 20 --size 8 --seed 5");
    CHECK(r.exit_code == 0);
    CHECK(count_files(out1) == 220);

    const fs::path out2 = temp_dir("gen2");
    run("gen-data --out " + out2.string() + " --per-class 20 --size 8 --seed 5");
    CHECK(tree_hash(out1) == tree_hash(out2));

    auto bad = run("gen-data --out " + out1.string() + " --size 4");
    CHECK(bad.exit_code == 2);
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("every subcommand documents its flags in --help") {
    auto top = run("--help");
    CHECK(top.exit_code == 0);
    for (const char* sub : {"gen-data", "pretrain", "finetune", "analyze", "bench"})
        CHECK(top.output.find(sub) != std::string::npos);

    auto pre = run("pretrain --help");
    for (const char* flag :
         {"--seed", "--tau", "--lr0", "--decay-steps", "--decay-rate", "--freeze-epochs",
          "--epochs", "--batch", "--tensorized", "--bond", "--in-split", "--out-split",
          "--threads", "--out-dir", "--config", "--data", "--image-size", "--crop-scale",
          "--brightness", "--contrast", "--saturation", "--flip-prob"})
        CHECK_MESSAGE(pre.output.find(flag) != std::string::npos, "missing ", flag);

    auto ana = run("analyze --help");
    for (const char* flag : {"--bonds", "--encoder-params", "--flatten-dim", "--include-bias"})
        CHECK_MESSAGE(ana.output.find(flag) != std::string::npos, "missing ", flag);

    auto ben = run("bench --help");
    for (const char* flag : {"--mode", "--batches", "--repeats", "--warmup", "--formats"})
        CHECK_MESSAGE(ben.output.find(flag) != std::string::npos, "missing ", flag);
}

TEST_CASE("pretrain then finetune through the CLI, with metadata echo and auto-snip") {
    const fs::path data = temp_dir("data");
    run("gen-data --out " + data.string() + " --per-class 4 --size 8 --seed 3");

    const fs::path out = temp_dir("run");
    const fs::path cfg_path = out / "config.json";
    {
        json cfg;
        cfg["encoder_stages"] = {{1, 5}};  // feat 8
        cfg["image_size"] = 8;
        cfg["pretrain_epochs"] = 1;
        cfg["freeze_epochs"] = 0;
        cfg["finetune_epochs"] = 1;
        cfg["batch"] = 16;
        cfg["in_split"] = {2, 4};
        cfg["out_split"] = {64, 64};
        cfg["bond"] = 2;
        cfg["decay_rate"] = 0.93;
        std::ofstream os(cfg_path);
        os << cfg.dump();
    }

    auto pre = run("pretrain --data " + data.string() + " --config " + cfg_path.string() +
                   " --out-dir " + out.string() + " --seed 4");
    CHECK(pre.exit_code == 0);
    CHECK(fs::exists(out / "pretrained.ckpt"));
    REQUIRE(fs::exists(out / "run_metadata.json"));
    {
        std::ifstream is(out / "run_metadata.json");
        json meta = json::parse(is);
        CHECK(meta.at("config").at("decay_rate").get<double>() == 0.93);  // file value
        CHECK(meta.at("config").at("seed").get<uint64_t>() == 4);         // flag override
        CHECK(meta.at("config").at("tensorized").get<bool>() == false);   // default
        CHECK(meta.at("command").get<std::string>() == "pretrain");
    }

    auto fin = run("finetune --checkpoint " + (out / "pretrained.ckpt").string() + " --data " +
                   data.string() + " --config " + cfg_path.string() + " --out-dir " +
                   out.string() + " --single-layer-classifier");
    CHECK(fin.exit_code == 0);
    CHECK(fin.output.find("snipping") != std::string::npos);  // auto-snip is logged
    CHECK(fs::exists(out / "finetuned.ckpt"));

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("indivisible tensorized split fails with a numeric-error exit") {
    const fs::path data = temp_dir("data2");
    run("gen-data --out " + data.string() + " --per-class 2 --size 8 --seed 3");
    const fs::path out = temp_dir("run2");

    auto r = run("pretrain --data " + data.string() + " --out-dir " + out.string() +
                 " --image-size 8 --epochs 1 --freeze-epochs 0 --tensorized --bond 2" +
                 " --in-split 3,3 --out-split 64,64");
    CHECK(r.exit_code == 4);
    CHECK(r.output.find("error") != std::string::npos);

    auto missing = run("pretrain --data /nonexistent_dir_xyz --out-dir " + out.string() +
                       " --epochs 1 --freeze-epochs 0");
    CHECK(missing.exit_code == 3);

    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("fixed seed and single thread reproduce CLI checkpoints bitwise") {
    const fs::path data = temp_dir("data3");
    run("gen-data --out " + data.string() + " --per-class 2 --size 8 --seed 3");

    std::vector<std::string> bytes;
    for (const char* tag : {"runA", "runB"}) {
        const fs::path out = temp_dir(tag);
        auto r = run("pretrain --data " + data.string() + " --out-dir " + out.string() +
                     " --image-size 8 --epochs 1 --freeze-epochs 0 --batch 8 --seed 12"
                     " --threads 1");
        REQUIRE(r.exit_code == 0);
        std::ifstream is(out / "pretrained.ckpt", std::ios::binary);
        std::ostringstream os;
        os << is.rdbuf();
        bytes.push_back(os.str());
        fs::remove_all(out);
    }
    CHECK(bytes[0].size() > 0);
    CHECK(bytes[0] == bytes[1]);
    fs::remove_all(data);
}

TEST_CASE("pretrain exports the dataset manifest next to the metadata") {
    const fs::path data = temp_dir("data4");
    run("gen-data --out " + data.string() + " --per-class 2 --size 8 --seed 3");
    const fs::path out = temp_dir("run4");
    auto r = run("pretrain --data " + data.string() + " --out-dir " + out.string() +
                 " --image-size 8 --epochs 1 --freeze-epochs 0 --batch 8");
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(out / "dataset_manifest.csv"));
    std::ifstream is(out / "dataset_manifest.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "path,class_index,width,height");
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 22);
    fs::remove_all(data);
    fs::remove_all(out);
}

TEST_CASE("analyze emits the default five-bond sweep") {
    const fs::path out = temp_dir("ana");
    auto r = run("analyze --out-dir " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("95.4") != std::string::npos);
    REQUIRE(fs::exists(out / "analyze.csv"));
    std::ifstream is(out / "analyze.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(is, line)) lines.push_back(line);
    REQUIRE(lines.size() == 6);  // header + bonds 16..256
    CHECK(lines[1].rfind("16,", 0) == 0);
    CHECK(lines[5].rfind("256,", 0) == 0);
    fs::remove_all(out);
}

TEST_CASE("bench --mode layer writes a report per format with the requested sweep") {
    const fs::path out = temp_dir("bench");
    auto r = run("bench --mode layer --batches 2,3,4 --repeats 5 --warmup 1 --in-split 2,4"
                 " --out-split 4,4 --bond 2 --out-dir " + out.string());
    CHECK(r.exit_code == 0);
    for (const char* f : {"bench_layer.csv", "bench_layer.json", "bench_layer.svg"})
        CHECK(fs::exists(out / f));
    std::ifstream is(out / "bench_layer.csv");
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 1 + 3 * 2);  // header + 3 batches x 2 variants

    auto bad = run("bench --mode nope --out-dir " + out.string());
    CHECK(bad.exit_code == 2);
    fs::remove_all(out);
}

TEST_CASE("bench --mode training sweeps both variants on a tiny corpus") {
    const fs::path data = temp_dir("benchdata");
    run("gen-data --out " + data.string() + " --per-class 1 --size 8 --seed 2");
    const fs::path out = temp_dir("benchtrain");
    auto r = run("bench --mode training --data " + data.string() + " --batches 2" +
                 " --repeats 5 --warmup 1 --image-size 8 --out-dir " + out.string() +
                 " --formats csv");
    CHECK(r.exit_code == 0);
    REQUIRE(fs::exists(out / "bench_training.csv"));
    std::ifstream is(out / "bench_training.csv");
    std::string line;
    int rows = 0;
    bool has_tt = false, has_dense = false;
    while (std::getline(is, line)) {
        ++rows;
        has_tt |= line.find(",tt,") != std::string::npos;
        has_dense |= line.find(",dense,") != std::string::npos;
    }
    CHECK(rows == 3);  // header + 2 variants
    CHECK(has_tt);
    CHECK(has_dense);
    fs::remove_all(data);
    fs::remove_all(out);
}
