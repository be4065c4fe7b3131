#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttml/layers.hpp"
#include "ttml/pipeline.hpp"

namespace ttml {

// Rate of reduction in computational time: (t_base - t_tt) / t_base.
// Negative when the factorized variant is slower.
double speedup(double t_base, double t_tt);

struct BenchEnv {
    int threads = 1;
    std::string compiler;
    std::string host;
};

struct BenchRow {
    int64_t batch = 0;
    std::string variant;  // "dense" or "tt"
    double median_s = 0.0;
    double min_s = 0.0;
    double mean_s = 0.0;
    uint64_t flops = 0;    // measured forward FLOPs (2 x counted MACs)
    double speedup = 0.0;  // derived per batch size; 0 on dense rows
};

struct BenchReport {
    std::string mode;  // "layer" or "training"
    BenchEnv env;
    int repeats = 0;
    int warmup = 0;
    std::vector<BenchRow> rows;
};

BenchEnv current_env();

// Median of the repeat samples (mean of the two middle values when even);
// the primary statistic throughout.
double median(std::vector<double> samples);

using Clock = std::function<double()>;
double steady_now();

// Times forward+backward iterations of the factorized layer against a plain
// dense layer of the same dimensions, same inputs per batch size. The flops
// column is measured with the MAC counter over a single forward pass.
BenchReport bench_layer(const TTDenseSpec& spec, const std::vector<int64_t>& batches,
                        int repeats, int warmup, uint64_t seed, Clock now = steady_now);

// Times full contrastive training iterations (forward + loss + backward +
// update; augmentation happens outside the timed region) for the general and
// tensorized models built from `spec`.
BenchReport bench_training(const ModelSpec& spec, const TrainConfig& cfg,
                           const Dataset& data, const std::vector<int64_t>& batches,
                           int repeats, int warmup, Clock now = steady_now);

void write_bench_csv(const BenchReport& rep, std::ostream& os);
nlohmann::json bench_json(const BenchReport& rep);
BenchReport bench_from_json(const nlohmann::json& j);
std::string bench_svg(const BenchReport& rep);

// format in {csv, json, svg}; writes <stem>.<format> style paths verbatim.
void emit_report(const BenchReport& rep, const std::string& format,
                 const std::filesystem::path& path);

}  // namespace ttml
