#include "ttml/compression.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace ttml {

LayerParamCount layer_params(const TTDenseSpec& spec, bool include_bias) {
    spec.validate();
    LayerParamCount c;
    c.tt = tt_weight_params(spec);
    c.dense = spec.in_dim() * spec.out_dim();
    if (include_bias) {
        c.tt += spec.out_dim();
        c.dense += spec.out_dim();
    }
    return c;
}

double bond_parity(const TTDenseSpec& spec) {
    return double(spec.in_dim() * spec.out_dim()) /
           double(spec.in_a * spec.out_c + spec.in_b * spec.out_d);
}

FlopCount flops_estimate(const TTDenseSpec& spec, int64_t batch) {
    spec.validate();
    if (batch < 1) throw UsageError("flops_estimate: batch must be >= 1");
    const int64_t a = spec.in_a, b = spec.in_b, c = spec.out_c, d = spec.out_d, r = spec.bond;
    FlopCount f;
    f.tt = 2 * batch * (a * b * c * r + b * c * d * r);
    f.dense = 2 * batch * (a * b * c * d);
    return f;
}

CompressionReport model_reduction(const CompressionAssumptions& a, int64_t bond) {
    if (a.head.size() != 3) throw UsageError("model_reduction: head must have 3 layers");
    TTDenseSpec tt{a.in_split_a, a.in_split_b, a.out_split_c, a.out_split_d, bond};
    tt.validate();
    if (tt.in_dim() != a.flatten_dim)
        throw ShapeError("model_reduction: split " + std::to_string(a.in_split_a) + "x" +
                         std::to_string(a.in_split_b) + " does not divide flatten_dim " +
                         std::to_string(a.flatten_dim));
    if (tt.out_dim() != a.head[0])
        throw ShapeError("model_reduction: split " + std::to_string(a.out_split_c) + "x" +
                         std::to_string(a.out_split_d) + " does not divide head width " +
                         std::to_string(a.head[0]));

    CompressionReport rep;
    rep.assumptions = a;
    rep.bond = bond;

    auto push = [&](const std::string& name, const std::string& kind, int64_t dense,
                    int64_t actual) {
        CompressionRow row{name, kind, dense, actual,
                           dense > 0 ? 1.0 - double(actual) / double(dense) : 0.0};
        rep.rows.push_back(row);
        rep.total_dense += dense;
        rep.total_actual += actual;
    };

    push("encoder", "opaque", a.encoder_params, a.encoder_params);
    const LayerParamCount first = layer_params(tt, a.include_bias);
    push("head.0 (" + std::to_string(a.flatten_dim) + "->" + std::to_string(a.head[0]) + ")",
         "tt bond=" + std::to_string(bond), first.dense, first.tt);
    for (size_t i = 1; i < a.head.size(); ++i) {
        int64_t params = a.head[i - 1] * a.head[i] + (a.include_bias ? a.head[i] : 0);
        push("head." + std::to_string(i) + " (" + std::to_string(a.head[i - 1]) + "->" +
                 std::to_string(a.head[i]) + ")",
             "dense", params, params);
    }

    rep.reduction_rate = 1.0 - double(rep.total_actual) / double(rep.total_dense);
    rep.first_layer_reduction = rep.rows[1].reduction;
    return rep;
}

const std::vector<std::pair<int64_t, double>>& reference_reduction_rates() {
    static const std::vector<std::pair<int64_t, double>> rates = {
        {16, 95.4}, {32, 95.0}, {64, 94.2}, {128, 92.6}, {256, 89.4}};
    return rates;
}

namespace {

double reference_for(int64_t bond) {
    for (const auto& [b, r] : reference_reduction_rates())
        if (b == bond) return r;
    return -1.0;
}

}  // namespace

void write_compression_text(const std::vector<CompressionReport>& sweep, std::ostream& os) {
    if (sweep.empty()) return;
    const auto& a = sweep.front().assumptions;
    char line[256];
    os << "assumptions: encoder_params=" << a.encoder_params << " flatten_dim=" << a.flatten_dim
       << " head=[" << a.head[0] << "," << a.head[1] << "," << a.head[2] << "]"
       << " in_split=" << a.in_split_a << "x" << a.in_split_b << " out_split=" << a.out_split_c
       << "x" << a.out_split_d << " include_bias=" << (a.include_bias ? "true" : "false")
       << "\n";
    os << "note: encoder_params and flatten_dim are assumptions, not measurements; the\n"
          "      reference column lists the whole-model rates this sweep is compared to.\n\n";
    std::snprintf(line, sizeof line, "%6s %16s %16s %12s %12s %12s %10s\n", "bond",
                  "dense_params", "actual_params", "model_red%", "layer_red%", "reference%",
                  "|dev|");
    os << line;
    for (const auto& rep : sweep) {
        const double ref = reference_for(rep.bond);
        const double model_pct = 100.0 * rep.reduction_rate;
        if (ref >= 0)
            std::snprintf(line, sizeof line, "%6lld %16lld %16lld %12.2f %12.2f %12.1f %10.2f\n",
                          (long long)rep.bond, (long long)rep.total_dense,
                          (long long)rep.total_actual, model_pct,
                          100.0 * rep.first_layer_reduction, ref, std::fabs(model_pct - ref));
        else
            std::snprintf(line, sizeof line, "%6lld %16lld %16lld %12.2f %12.2f %12s %10s\n",
                          (long long)rep.bond, (long long)rep.total_dense,
                          (long long)rep.total_actual, model_pct,
                          100.0 * rep.first_layer_reduction, "-", "-");
        os << line;
    }
}

void write_compression_csv(const std::vector<CompressionReport>& sweep, std::ostream& os) {
    os << "bond,total_dense,total_actual,model_reduction_pct,layer_reduction_pct,"
          "reference_pct,abs_deviation_pct\n";
    char num[64];
    for (const auto& rep : sweep) {
        const double ref = reference_for(rep.bond);
        const double model_pct = 100.0 * rep.reduction_rate;
        os << rep.bond << "," << rep.total_dense << "," << rep.total_actual << ",";
        std::snprintf(num, sizeof num, "%.6f", model_pct);
        os << num << ",";
        std::snprintf(num, sizeof num, "%.6f", 100.0 * rep.first_layer_reduction);
        os << num << ",";
        if (ref >= 0) {
            std::snprintf(num, sizeof num, "%.1f", ref);
            os << num << ",";
            std::snprintf(num, sizeof num, "%.6f", std::fabs(model_pct - ref));
            os << num;
        } else {
            os << ",";
        }
        os << "\n";
    }
}

nlohmann::json compression_json(const std::vector<CompressionReport>& sweep) {
    nlohmann::json out;
    if (!sweep.empty()) {
        const auto& a = sweep.front().assumptions;
        out["assumptions"] = {{"encoder_params", a.encoder_params},
                              {"flatten_dim", a.flatten_dim},
                              {"head", a.head},
                              {"in_split", {a.in_split_a, a.in_split_b}},
                              {"out_split", {a.out_split_c, a.out_split_d}},
                              {"include_bias", a.include_bias},
                              {"note", "encoder_params and flatten_dim are assumptions"}};
    }
    auto& rows = out["sweep"] = nlohmann::json::array();
    for (const auto& rep : sweep) {
        nlohmann::json j;
        j["bond"] = rep.bond;
        j["total_dense"] = rep.total_dense;
        j["total_actual"] = rep.total_actual;
        j["model_reduction"] = rep.reduction_rate;
        j["layer_reduction"] = rep.first_layer_reduction;
        const double ref = reference_for(rep.bond);
        if (ref >= 0) {
            j["reference_pct"] = ref;
            j["abs_deviation_pct"] = std::fabs(100.0 * rep.reduction_rate - ref);
        }
        auto& layers = j["layers"] = nlohmann::json::array();
        for (const auto& row : rep.rows)
            layers.push_back({{"name", row.name},
                              {"kind", row.kind},
                              {"dense_params", row.dense_params},
                              {"actual_params", row.actual_params},
                              {"reduction", row.reduction}});
        rows.push_back(j);
    }
    return out;
}

}  // namespace ttml
