#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ttml/layers.hpp"

namespace ttml {

// tt = r(ac + bd), dense = abcd, each + cd when biases are counted.
struct LayerParamCount {
    int64_t tt = 0;
    int64_t dense = 0;
};
LayerParamCount layer_params(const TTDenseSpec& spec, bool include_bias);

// Bond at which the factorized and dense parameter counts break even:
// abcd / (ac + bd).
double bond_parity(const TTDenseSpec& spec);

// Forward FLOPs per batch: tt = 2 r (abc + bcd) B, dense = 2 abcd B.
struct FlopCount {
    int64_t tt = 0;
    int64_t dense = 0;
};
FlopCount flops_estimate(const TTDenseSpec& spec, int64_t batch);

// The whole-model accounting is computed under explicit assumptions for the
// quantities the architecture itself does not pin down: the encoder's own
// parameter count and the flattened feature dimension entering the head.
struct CompressionAssumptions {
    int64_t encoder_params = 8'000'000;
    int64_t flatten_dim = 65'536;
    std::vector<int64_t> head = {4096, 1024, 512};
    int64_t in_split_a = 256, in_split_b = 256;
    int64_t out_split_c = 64, out_split_d = 64;
    bool include_bias = false;
};

struct CompressionRow {
    std::string name;
    std::string kind;
    int64_t dense_params = 0;   // dense-equivalent count
    int64_t actual_params = 0;  // count as built
    double reduction = 0.0;     // 1 - actual/dense
};

struct CompressionReport {
    CompressionAssumptions assumptions;
    int64_t bond = 0;
    std::vector<CompressionRow> rows;
    int64_t total_dense = 0;
    int64_t total_actual = 0;
    double reduction_rate = 0.0;         // whole model
    double first_layer_reduction = 0.0;  // factorized layer alone
};

CompressionReport model_reduction(const CompressionAssumptions& a, int64_t bond);

// Reference whole-model reduction rates (percent) for the default bond
// sweep; the analyzer prints computed values next to these.
const std::vector<std::pair<int64_t, double>>& reference_reduction_rates();

// analyze output in the three formats. The text table includes, for bonds
// with a reference value, the absolute deviation between computed and
// reference percentages.
void write_compression_text(const std::vector<CompressionReport>& sweep, std::ostream& os);
void write_compression_csv(const std::vector<CompressionReport>& sweep, std::ostream& os);
nlohmann::json compression_json(const std::vector<CompressionReport>& sweep);

}  // namespace ttml
