// Independent reference implementations used as test oracles. Everything
// here is deliberately written as plain nested loops over doubles, separate
// from the kernels under test.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ttml/rng.hpp"
#include "ttml/tensor.hpp"

namespace oracle {

// Brute-force strided contraction.
inline ttml::Tensor contract(const ttml::Tensor& x, const ttml::Tensor& y,
                             const std::vector<ttml::AxisPair>& axes) {
    using namespace ttml;
    std::vector<bool> xc(size_t(x.rank()), false), yc(size_t(y.rank()), false);
    for (auto [xa, ya] : axes) {
        xc[size_t(xa)] = true;
        yc[size_t(ya)] = true;
    }
    Shape out_shape;
    std::vector<int> x_free, y_free;
    for (int a = 0; a < x.rank(); ++a)
        if (!xc[size_t(a)]) {
            x_free.push_back(a);
            out_shape.push_back(x.shape[size_t(a)]);
        }
    for (int a = 0; a < y.rank(); ++a)
        if (!yc[size_t(a)]) {
            y_free.push_back(a);
            out_shape.push_back(y.shape[size_t(a)]);
        }
    Tensor out = zeros(out_shape);
    const auto xs = row_major_strides(x.shape);
    const auto ys = row_major_strides(y.shape);

    int64_t k_total = 1;
    for (auto [xa, ya] : axes) k_total *= x.shape[size_t(xa)];

    const int64_t out_n = out.size();
    for (int64_t o = 0; o < out_n; ++o) {
        // decompose o into free coordinates
        std::vector<int64_t> coord(out_shape.size());
        int64_t rem = o;
        for (int d = int(out_shape.size()) - 1; d >= 0; --d) {
            coord[size_t(d)] = rem % out_shape[size_t(d)];
            rem /= out_shape[size_t(d)];
        }
        double acc = 0.0;
        for (int64_t k = 0; k < k_total; ++k) {
            int64_t xi = 0, yi = 0, kk = k;
            for (int p = int(axes.size()) - 1; p >= 0; --p) {
                const int64_t e = x.shape[size_t(axes[size_t(p)].x_axis)];
                const int64_t c = kk % e;
                kk /= e;
                xi += c * xs[size_t(axes[size_t(p)].x_axis)];
                yi += c * ys[size_t(axes[size_t(p)].y_axis)];
            }
            for (size_t d = 0; d < x_free.size(); ++d)
                xi += coord[d] * xs[size_t(x_free[d])];
            for (size_t d = 0; d < y_free.size(); ++d)
                yi += coord[x_free.size() + d] * ys[size_t(y_free[d])];
            acc += double(x.at(xi)) * double(y.at(yi));
        }
        (*out.data)[size_t(o)] = float(acc);
    }
    return out;
}

// Direct double-loop NT-Xent over all 2N directed pairs, via scalar cosines.
inline double nt_xent(const ttml::Tensor& z, double tau) {
    const int64_t rows = z.shape[0], dim = z.shape[1];
    auto cosine = [&](int64_t i, int64_t j) {
        double dot = 0, ni = 0, nj = 0;
        for (int64_t d = 0; d < dim; ++d) {
            const double a = z.at(i * dim + d), b = z.at(j * dim + d);
            dot += a * b;
            ni += a * a;
            nj += b * b;
        }
        return dot / (std::sqrt(ni) * std::sqrt(nj));
    };
    double total = 0.0;
    for (int64_t i = 0; i < rows; ++i) {
        const int64_t j = i ^ 1;
        double denom = 0.0;
        for (int64_t k = 0; k < rows; ++k)
            if (k != i) denom += std::exp(cosine(i, k) / tau);
        total += -std::log(std::exp(cosine(i, j) / tau) / denom);
    }
    return total / double(rows);
}

inline ttml::Tensor random_tensor(ttml::Shape shape, ttml::Rng& rng, float lo = -2.0f,
                                  float hi = 2.0f) {
    ttml::Tensor t = ttml::zeros(std::move(shape));
    for (auto& v : *t.data) v = rng.uniformf(lo, hi);
    return t;
}

// Values in [-hi, -lo] u [lo, hi]: random sign, magnitude bounded away from
// zero. Keeps finite-difference checks conditioned (a gradient entry is
// never tiny relative to the outputs it feeds) while staying inside [-2, 2].
inline ttml::Tensor random_tensor_floored(ttml::Shape shape, ttml::Rng& rng, float lo = 0.3f,
                                          float hi = 2.0f) {
    ttml::Tensor t = ttml::zeros(std::move(shape));
    for (auto& v : *t.data) {
        const float mag = rng.uniformf(lo, hi);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// Pass iff |got - want| <= max(rel * |want|, floor) elementwise; returns the
// first failing index or -1.
inline int64_t grad_mismatch(const ttml::Tensor& got, const ttml::Tensor& want, double rel,
                             double floor) {
    for (int64_t i = 0; i < got.size(); ++i) {
        const double g = got.at(i), w = want.at(i);
        if (std::abs(g - w) > std::max(rel * std::abs(w), floor)) return i;
    }
    return -1;
}

// Nudges values away from the kink/tie neighborhoods that break central
// differences: |x| < margin moves to +/- margin.
inline void separate_from(ttml::Tensor& t, float point, float margin) {
    for (auto& v : *t.data) {
        const float d = v - point;
        if (std::abs(d) < margin) v = point + (d >= 0 ? margin : -margin);
    }
}

// Jacobian gradcheck: backward() against finite_diff_grad, row by row. Each
// row uses the projection f_j(x) = op(x)[j], whose magnitude scales with its
// own gradient, keeping the h=1e-3 central difference conditioned in
// float32. Returns the number of failing Jacobian entries.
template <typename Op>
int jacobian_mismatches(const Op& op, ttml::Tensor x, double rel = 1e-3,
                        double floor = 1e-5) {
    using namespace ttml;
    x.set_requires_grad(true);
    Tensor probe_base = x.detached();

    Shape out_shape;
    {
        Graph g(false);
        out_shape = op(g, probe_base).shape;
    }
    const int64_t out_n = numel(out_shape);

    int failures = 0;
    for (int64_t j = 0; j < out_n; ++j) {
        Tensor mask = zeros(out_shape);
        (*mask.data)[size_t(j)] = 1.0f;

        Graph g;
        x.zero_grad();
        Tensor loss = g.sum(g.mul(op(g, x), mask));
        g.backward(loss);
        Tensor analytic = zeros(x.shape);
        std::copy(x.grad->begin(), x.grad->end(), analytic.data->begin());

        auto fj = [&](const Tensor& probe) {
            Graph gg(false);
            return double((*op(gg, probe).data)[size_t(j)]);
        };
        Tensor fd = finite_diff_grad(fj, probe_base, 1e-3);
        if (grad_mismatch(analytic, fd, rel, floor) >= 0) ++failures;
    }
    return failures;
}

// Minimal XML well-formedness scan: tag stack matching, attribute quoting.
inline bool xml_well_formed(const std::string& s) {
    std::vector<std::string> stack;
    size_t i = 0;
    if (s.rfind("<?xml", 0) == 0) i = s.find("?>") + 2;
    while (i < s.size()) {
        if (s[i] != '<') {
            ++i;
            continue;
        }
        size_t close = s.find('>', i);
        if (close == std::string::npos) return false;
        std::string tag = s.substr(i + 1, close - i - 1);
        if (!tag.empty() && tag.front() == '/') {
            std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
        } else if (!tag.empty() && tag.back() != '/') {
            std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
            stack.push_back(name);
        }
        i = close + 1;
    }
    return stack.empty();
}

}  // namespace oracle
