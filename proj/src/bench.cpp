#include "ttml/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <new>
#include <ostream>
#include <sstream>

#include <sys/utsname.h>

#include "ttml/rng.hpp"

namespace ttml {

double speedup(double t_base, double t_tt) {
    if (!(t_base > 0.0) || !(t_tt > 0.0))
        throw DomainError("speedup: wall times must be positive");
    return (t_base - t_tt) / t_base;
}

double median(std::vector<double> samples) {
    if (samples.empty()) throw DomainError("median: no samples");
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double steady_now() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

BenchEnv current_env() {
    BenchEnv env;
    env.threads = num_threads();
#if defined(__VERSION__)
    env.compiler = __VERSION__;
#else
    env.compiler = "unknown";
#endif
    utsname u{};
    env.host = uname(&u) == 0 ? std::string(u.sysname) + " " + u.machine : "unknown";
    return env;
}

namespace {

struct Timings {
    double med, mn, mean;
};

Timings summarize(const std::vector<double>& t) {
    Timings s{};
    s.med = median(t);
    s.mn = *std::min_element(t.begin(), t.end());
    double acc = 0;
    for (double v : t) acc += v;
    s.mean = acc / double(t.size());
    return s;
}

void check_bench_args(int repeats, int warmup) {
    if (repeats < 5) throw UsageError("bench: repeats must be >= 5");
    if (warmup < 1) throw UsageError("bench: warmup must be >= 1");
}

// Fills in the tt rows' speedup from the dense row of the same batch size.
void derive_speedups(BenchReport& rep) {
    for (auto& row : rep.rows) {
        if (row.variant != "tt") continue;
        for (const auto& base : rep.rows)
            if (base.variant == "dense" && base.batch == row.batch) {
                row.speedup = speedup(base.median_s, row.median_s);
                break;
            }
    }
}

}  // namespace

BenchReport bench_layer(const TTDenseSpec& spec, const std::vector<int64_t>& batches,
                        int repeats, int warmup, uint64_t seed, Clock now) {
    spec.validate();
    check_bench_args(repeats, warmup);
    if (batches.empty()) throw UsageError("bench: need at least one batch size");

    BenchReport rep;
    rep.mode = "layer";
    rep.env = current_env();
    rep.repeats = repeats;
    rep.warmup = warmup;

    TTDenseLayer tt = tt_init(spec, seed);
    DenseLayer dense = dense_init(spec.in_dim(), spec.out_dim(), seed ^ 0x9e37);

    for (int64_t batch : batches) {
        Tensor x;
        try {
            x = zeros({batch, spec.in_dim()});
        } catch (const std::bad_alloc&) {
            throw DataError("bench: allocation failure for batch " + std::to_string(batch) +
                            " x " + std::to_string(spec.in_dim()));
        }
        Rng rng = Rng::stream(seed, uint64_t(batch));
        for (auto& v : *x.data) v = rng.uniformf(-1.0f, 1.0f);

        auto run_variant = [&](const std::string& variant) {
            auto forward = [&](Graph& g) {
                return variant == "tt" ? tt_forward(g, tt, x) : dense_forward(g, dense, x);
            };
            auto zero_params = [&] {
                if (variant == "tt") {
                    tt.core1.zero_grad();
                    tt.core2.zero_grad();
                    tt.bias.zero_grad();
                } else {
                    dense.weight.zero_grad();
                    dense.bias.zero_grad();
                }
            };

            // Forward FLOPs measured once, outside the timed loop.
            reset_mac_count();
            {
                Graph g(false);
                forward(g);
            }
            const uint64_t flops = 2 * mac_count();
            reset_mac_count();

            std::vector<double> times;
            for (int it = 0; it < warmup + repeats; ++it) {
                zero_params();
                const double t0 = now();
                Graph g;
                Tensor y = forward(g);
                Tensor loss = g.sum(y);
                g.backward(loss);
                const double t1 = now();
                if (it >= warmup) times.push_back(t1 - t0);
            }
            const Timings s = summarize(times);
            rep.rows.push_back({batch, variant, s.med, s.mn, s.mean, flops, 0.0});
        };
        run_variant("dense");
        run_variant("tt");
    }
    derive_speedups(rep);
    return rep;
}

BenchReport bench_training(const ModelSpec& spec, const TrainConfig& cfg, const Dataset& data,
                           const std::vector<int64_t>& batches, int repeats, int warmup,
                           Clock now) {
    check_bench_args(repeats, warmup);
    if (data.empty()) throw DataError("bench: dataset is empty");
    if (batches.empty()) throw UsageError("bench: need at least one batch size");

    BenchReport rep;
    rep.mode = "training";
    rep.env = current_env();
    rep.repeats = repeats;
    rep.warmup = warmup;

    AugmentConfig aug = cfg.aug;
    aug.out_h = aug.out_w = data.image_size;
    aug.seed = cfg.seed;

    for (int64_t batch : batches) {
        // Augmented views are prepared outside the timed region.
        Tensor views = zeros({2 * batch, data.image_size, data.image_size, 3});
        {
            float* p = views.mut();
            const int64_t stride = int64_t(data.image_size) * data.image_size * 3;
            for (int64_t k = 0; k < batch; ++k) {
                const auto& img = data.samples[size_t(k) % data.size()].image;
                Rng stream = Rng::stream(aug.seed, uint64_t(batch), uint64_t(k), 0xA06);
                for (int v = 0; v < 2; ++v) {
                    Tensor view = augment(img, aug, stream);
                    std::copy(view.ptr(), view.ptr() + stride, p + (2 * k + v) * stride);
                }
            }
        }

        for (const std::string variant : {"dense", "tt"}) {
            ModelSpec ms = spec;
            ms.tensorized = variant == "tt";
            Model model = build_model(ms, cfg.seed);
            const std::vector<Tensor> params = model.parameters();
            AdamState opt;

            reset_mac_count();
            {
                Graph g(false);
                model_embed(g, model, views);
            }
            const uint64_t flops = 2 * mac_count();
            reset_mac_count();

            std::vector<double> times;
            for (int it = 0; it < warmup + repeats; ++it) {
                const double t0 = now();
                Graph g;
                Tensor z = model_embed(g, model, views);
                Tensor loss = nt_xent(g, z, cfg.tau);
                model.zero_grads();
                g.backward(loss);
                adam_step(opt, params, lr_at(cfg, it));
                const double t1 = now();
                if (it >= warmup) times.push_back(t1 - t0);
            }
            const Timings s = summarize(times);
            rep.rows.push_back({batch, variant, s.med, s.mn, s.mean, flops, 0.0});
        }
    }
    derive_speedups(rep);
    return rep;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void write_bench_csv(const BenchReport& rep, std::ostream& os) {
    os << "batch,variant,median_s,min_s,mean_s,flops,speedup\n";
    for (const auto& r : rep.rows)
        os << r.batch << "," << r.variant << "," << fmt_g(r.median_s) << "," << fmt_g(r.min_s)
           << "," << fmt_g(r.mean_s) << "," << r.flops << "," << fmt_g(r.speedup) << "\n";
}

nlohmann::json bench_json(const BenchReport& rep) {
    nlohmann::json j;
    j["mode"] = rep.mode;
    j["env"] = {{"threads", rep.env.threads},
                {"compiler", rep.env.compiler},
                {"host", rep.env.host}};
    j["repeats"] = rep.repeats;
    j["warmup"] = rep.warmup;
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows)
        rows.push_back({{"batch", r.batch},
                        {"variant", r.variant},
                        {"median_s", r.median_s},
                        {"min_s", r.min_s},
                        {"mean_s", r.mean_s},
                        {"flops", r.flops},
                        {"speedup", r.speedup}});
    return j;
}

BenchReport bench_from_json(const nlohmann::json& j) {
    BenchReport rep;
    rep.mode = j.at("mode").get<std::string>();
    rep.env.threads = j.at("env").at("threads").get<int>();
    rep.env.compiler = j.at("env").at("compiler").get<std::string>();
    rep.env.host = j.at("env").at("host").get<std::string>();
    rep.repeats = j.at("repeats").get<int>();
    rep.warmup = j.at("warmup").get<int>();
    for (const auto& r : j.at("rows"))
        rep.rows.push_back({r.at("batch").get<int64_t>(), r.at("variant").get<std::string>(),
                            r.at("median_s").get<double>(), r.at("min_s").get<double>(),
                            r.at("mean_s").get<double>(), r.at("flops").get<uint64_t>(),
                            r.at("speedup").get<double>()});
    return rep;
}

std::string bench_svg(const BenchReport& rep) {
    std::vector<std::pair<int64_t, double>> bars;
    for (const auto& r : rep.rows)
        if (r.variant == "tt") bars.push_back({r.batch, r.speedup});
    std::sort(bars.begin(), bars.end());

    const int bar_w = 48, gap = 24, left = 70, top = 30, plot_h = 240, bottom = 60;
    const int width = left + int(bars.size()) * (bar_w + gap) + gap + 20;
    const int height = top + plot_h + bottom;

    double lo = 0.0, hi = 0.0;
    for (const auto& [b, s] : bars) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi - lo < 1e-9) hi = lo + 1.0;
    const double span = (hi - lo) * 1.15;
    auto ypos = [&](double v) { return top + plot_h - (v - lo * 1.075) / span * plot_h; };
    const double y0 = ypos(0.0);

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "  <text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"13\">per-iteration speedup ("
       << rep.mode << ", threads=" << rep.env.threads << ")</text>\n";
    // axes
    os << "  <line x1=\"" << left - 8 << "\" y1=\"" << fmt_g(y0) << "\" x2=\"" << width - 12
       << "\" y2=\"" << fmt_g(y0) << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    os << "  <line x1=\"" << left - 8 << "\" y1=\"" << top << "\" x2=\"" << left - 8
       << "\" y2=\"" << top + plot_h << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
    os << "  <text x=\"16\" y=\"" << top + plot_h / 2
       << "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 16 "
       << top + plot_h / 2 << ")\" text-anchor=\"middle\">speedup</text>\n";
    os << "  <text x=\"" << left + (int(bars.size()) * (bar_w + gap)) / 2 << "\" y=\""
       << height - 12
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">batch "
          "size</text>\n";

    int x = left + gap / 2;
    char buf[64];
    for (const auto& [batch, s] : bars) {
        const double yv = ypos(s);
        const double ry = std::min(yv, y0);
        const double rh = std::max(std::fabs(yv - y0), 0.5);
        os << "  <rect x=\"" << x << "\" y=\"" << fmt_g(ry) << "\" width=\"" << bar_w
           << "\" height=\"" << fmt_g(rh) << "\" fill=\"" << (s >= 0 ? "#4878a8" : "#a84848")
           << "\"/>\n";
        std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * s);
        os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << fmt_g(ry - 4)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << buf
           << "</text>\n";
        os << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << batch
           << "</text>\n";
        x += bar_w + gap;
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(const BenchReport& rep, const std::string& format,
                 const std::filesystem::path& path) {
    if (rep.rows.empty()) throw UsageError("emit_report: empty report");
    std::ofstream os(path);
    if (!os) throw DataError("emit_report: cannot write " + path.string());
    if (format == "csv")
        write_bench_csv(rep, os);
    else if (format == "json")
        os << bench_json(rep).dump(2) << "\n";
    else if (format == "svg")
        os << bench_svg(rep);
    else
        throw UsageError("emit_report: unknown format '" + format + "'");
    if (!os) throw DataError("emit_report: write failed for " + path.string());
}

}  // namespace ttml
