#include "ttml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <thread>

namespace ttml {

int64_t numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

std::vector<int64_t> row_major_strides(const Shape& shape) {
    std::vector<int64_t> strides(shape.size(), 1);
    for (int i = int(shape.size()) - 2; i >= 0; --i)
        strides[size_t(i)] = strides[size_t(i) + 1] * shape[size_t(i) + 1];
    return strides;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

namespace {

thread_local uint64_t g_macs = 0;
int g_threads = 1;

void check_extents(const Shape& shape) {
    for (int64_t e : shape)
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
}

}  // namespace

uint64_t mac_count() { return g_macs; }
void reset_mac_count() { g_macs = 0; }
void add_macs(uint64_t n) { g_macs += n; }

void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }
int num_threads() { return g_threads; }

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

float Tensor::item() const {
    if (!data || data->size() != 1)
        throw ShapeError("item(): tensor is not a single element, shape " + shape_str(shape));
    return (*data)[0];
}

void Tensor::set_requires_grad(bool on) {
    requires_grad = on;
    if (on && !grad)
        grad = std::make_shared<std::vector<float>>(data->size(), 0.0f);
    if (!on) grad.reset();
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0f);
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<float>>(*data);
    return t;
}

Tensor zeros(Shape shape) {
    check_extents(shape);
    Tensor t;
    t.data = std::make_shared<std::vector<float>>(size_t(numel(shape)), 0.0f);
    t.shape = std::move(shape);
    return t;
}

Tensor full(Shape shape, float value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
}

Tensor from_vec(Shape shape, std::vector<float> values) {
    check_extents(shape);
    if (numel(shape) != int64_t(values.size()))
        throw ShapeError("from_vec: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<float>>(std::move(values));
    return t;
}

Tensor scalar_tensor(float value) { return from_vec({}, {value}); }

// ---------------------------------------------------------------------------
// Graph plumbing
// ---------------------------------------------------------------------------

namespace {

void check_graph(const Graph* g, std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->graph && t->graph != g)
            throw UsageError("operand belongs to a different graph");
}

}  // namespace

void Graph::prepare_output(Tensor& out) {
    out.requires_grad = true;
    out.grad = std::make_shared<std::vector<float>>(out.data->size(), 0.0f);
    out.graph = this;
}

void Graph::register_node(const char* kind, Tensor& out, std::function<void()> backward_fn) {
    // Callers build the closure over a prepared copy of `out`; see prepare_output.
    out.node = int(tape_.size());
    tape_.push_back(Node{kind, std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
    if (loss.rank() != 0)
        throw ShapeError("backward: loss must be rank-0, got shape " + shape_str(loss.shape));
    if (loss.graph != this || loss.node < 0 || !loss.grad)
        throw UsageError("backward: loss is not attached to this graph");
    (*loss.grad)[0] += 1.0f;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) it->backward_fn();
}

// ---------------------------------------------------------------------------
// Contraction
// ---------------------------------------------------------------------------

namespace {

// Element offsets of every index combination of `axes`, enumerated row-major
// in the order the axis list is given.
std::vector<int64_t> axis_offsets(const Shape& shape, const std::vector<int64_t>& strides,
                                  const std::vector<int>& axes) {
    int64_t count = 1;
    for (int a : axes) count *= shape[size_t(a)];
    std::vector<int64_t> ofs(static_cast<size_t>(count));
    std::vector<int64_t> idx(axes.size(), 0);
    int64_t cur = 0;
    for (int64_t i = 0; i < count; ++i) {
        ofs[size_t(i)] = cur;
        for (int d = int(axes.size()) - 1; d >= 0; --d) {
            int a = axes[size_t(d)];
            ++idx[size_t(d)];
            cur += strides[size_t(a)];
            if (idx[size_t(d)] < shape[size_t(a)]) break;
            cur -= strides[size_t(a)] * shape[size_t(a)];
            idx[size_t(d)] = 0;
        }
    }
    return ofs;
}

std::vector<int64_t> iota_scaled(int64_t count, int64_t step) {
    std::vector<int64_t> v(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) v[size_t(i)] = i * step;
    return v;
}

bool is_identity(const std::vector<int64_t>& ofs) {
    for (size_t i = 0; i < ofs.size(); ++i)
        if (ofs[i] != int64_t(i)) return false;
    return true;
}

// Out[om[m] + on[n]] (+)= sum_k A[am[m] + ak[k]] * B[bk[k] + bn[n]].
// Accumulation per output element is a single 64-bit chain.
struct MacArgs {
    const float* a;
    const float* b;
    float* out;
    const std::vector<int64_t>& am;
    const std::vector<int64_t>& ak;
    const std::vector<int64_t>& bk;
    const std::vector<int64_t>& bn;
    const std::vector<int64_t>& om;
    const std::vector<int64_t>& on;
    bool accumulate;
};

void mac_rows(const MacArgs& g, int64_t m0, int64_t m1) {
    const int64_t K = int64_t(g.ak.size());
    const int64_t N = int64_t(g.bn.size());
    const bool ak_id = is_identity(g.ak);
    const bool bk_id = is_identity(g.bk);
    const bool bn_id = is_identity(g.bn);
    const bool on_id = is_identity(g.on);

    if (!bn_id && bk_id && ak_id) {
        // k runs contiguously through both operands: dot-product nest. This
        // is the input-gradient layout of a matmul, where the row-accumulator
        // nest would stride-gather the whole second operand per row.
        for (int64_t m = m0; m < m1; ++m) {
            const float* arow = g.a + g.am[size_t(m)];
            float* orow = g.out + g.om[size_t(m)];
            for (int64_t n = 0; n < N; ++n) {
                const float* brow = g.b + g.bn[size_t(n)];
                double acc = 0.0;
                for (int64_t k = 0; k < K; ++k) acc += double(arow[k]) * double(brow[k]);
                if (g.accumulate)
                    orow[g.on[size_t(n)]] += float(acc);
                else
                    orow[g.on[size_t(n)]] = float(acc);
            }
        }
        return;
    }

    std::vector<double> acc(static_cast<size_t>(N));
    for (int64_t m = m0; m < m1; ++m) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* arow = g.a + g.am[size_t(m)];
        for (int64_t k = 0; k < K; ++k) {
            const double av = arow[g.ak[size_t(k)]];
            const float* brow = g.b + g.bk[size_t(k)];
            if (bn_id) {
                for (int64_t n = 0; n < N; ++n) acc[size_t(n)] += av * brow[n];
            } else {
                for (int64_t n = 0; n < N; ++n) acc[size_t(n)] += av * brow[g.bn[size_t(n)]];
            }
        }
        float* orow = g.out + g.om[size_t(m)];
        if (g.accumulate) {
            if (on_id)
                for (int64_t n = 0; n < N; ++n) orow[n] += float(acc[size_t(n)]);
            else
                for (int64_t n = 0; n < N; ++n) orow[g.on[size_t(n)]] += float(acc[size_t(n)]);
        } else {
            if (on_id)
                for (int64_t n = 0; n < N; ++n) orow[n] = float(acc[size_t(n)]);
            else
                for (int64_t n = 0; n < N; ++n) orow[g.on[size_t(n)]] = float(acc[size_t(n)]);
        }
    }
}

void run_mac(const MacArgs& args) {
    const int64_t M = int64_t(args.am.size());
    const int64_t K = int64_t(args.ak.size());
    const int64_t N = int64_t(args.bn.size());
    add_macs(uint64_t(M) * uint64_t(K) * uint64_t(N));
    const int threads = num_threads();
    if (threads > 1 && M > 1 && M * K * N >= (int64_t(1) << 21)) {
        const int use = int(std::min<int64_t>(threads, M));
        std::vector<std::thread> pool;
        pool.reserve(size_t(use));
        for (int t = 0; t < use; ++t) {
            int64_t m0 = M * t / use;
            int64_t m1 = M * (t + 1) / use;
            pool.emplace_back([&args, m0, m1] { mac_rows(args, m0, m1); });
        }
        for (auto& th : pool) th.join();
    } else {
        mac_rows(args, 0, M);
    }
}

struct ContractAxes {
    std::vector<int> x_free, y_free, x_con, y_con;
};

ContractAxes split_axes(const Tensor& x, const Tensor& y, const std::vector<AxisPair>& axes) {
    ContractAxes r;
    std::vector<bool> xc(size_t(x.rank()), false), yc(size_t(y.rank()), false);
    for (size_t i = 0; i < axes.size(); ++i) {
        const auto [xa, ya] = axes[i];
        if (xa < 0 || xa >= x.rank() || ya < 0 || ya >= y.rank())
            throw ShapeError("contract: axis pair " + std::to_string(i) + " (x axis " +
                             std::to_string(xa) + ", y axis " + std::to_string(ya) +
                             ") out of range for shapes " + shape_str(x.shape) + " x " +
                             shape_str(y.shape));
        if (xc[size_t(xa)] || yc[size_t(ya)])
            throw ShapeError("contract: axis pair " + std::to_string(i) + " repeats an axis");
        if (x.shape[size_t(xa)] != y.shape[size_t(ya)])
            throw ShapeError("contract: axis pair " + std::to_string(i) + " (x axis " +
                             std::to_string(xa) + " extent " +
                             std::to_string(x.shape[size_t(xa)]) + ", y axis " +
                             std::to_string(ya) + " extent " +
                             std::to_string(y.shape[size_t(ya)]) + ") extents differ");
        xc[size_t(xa)] = yc[size_t(ya)] = true;
        r.x_con.push_back(xa);
        r.y_con.push_back(ya);
    }
    for (int a = 0; a < x.rank(); ++a)
        if (!xc[size_t(a)]) r.x_free.push_back(a);
    for (int a = 0; a < y.rank(); ++a)
        if (!yc[size_t(a)]) r.y_free.push_back(a);
    return r;
}

}  // namespace

Tensor Graph::contract(const Tensor& x, const Tensor& y, const std::vector<AxisPair>& axes) {
    check_graph(this, {&x, &y});
    const ContractAxes ax = split_axes(x, y, axes);
    if (int64_t(ax.x_free.size() + ax.y_free.size()) > 8)
        throw ShapeError("contract: output rank " +
                         std::to_string(ax.x_free.size() + ax.y_free.size()) + " exceeds 8");

    Shape out_shape;
    for (int a : ax.x_free) out_shape.push_back(x.shape[size_t(a)]);
    for (int a : ax.y_free) out_shape.push_back(y.shape[size_t(a)]);
    Tensor out = zeros(out_shape);

    const auto xs = row_major_strides(x.shape);
    const auto ys = row_major_strides(y.shape);
    const auto am = axis_offsets(x.shape, xs, ax.x_free);
    const auto ak = axis_offsets(x.shape, xs, ax.x_con);
    const auto bk = axis_offsets(y.shape, ys, ax.y_con);
    const auto bn = axis_offsets(y.shape, ys, ax.y_free);
    const int64_t N = int64_t(bn.size());
    run_mac({x.ptr(), y.ptr(), out.mut(), am, ak, bk, bn, iota_scaled(int64_t(am.size()), N),
             iota_scaled(N, 1), false});

    if (recording_ && (x.requires_grad || y.requires_grad)) {
        prepare_output(out);
        Tensor xv = x, yv = y, ov = out;
        register_node("contract", out, [xv, yv, ov, ax] {
            const auto xs2 = row_major_strides(xv.shape);
            const auto ys2 = row_major_strides(yv.shape);
            const int64_t Nf = int64_t(numel([&] {
                Shape s;
                for (int a : ax.y_free) s.push_back(yv.shape[size_t(a)]);
                return s;
            }()));
            if (xv.grad) {
                // dX[free_x, con_x] += sum_{free_y} dOut * Y
                run_mac({ov.grad->data(), yv.ptr(), xv.grad->data(),
                         iota_scaled(int64_t(ov.grad->size()) / Nf, Nf), iota_scaled(Nf, 1),
                         axis_offsets(yv.shape, ys2, ax.y_free),
                         axis_offsets(yv.shape, ys2, ax.y_con),
                         axis_offsets(xv.shape, xs2, ax.x_free),
                         axis_offsets(xv.shape, xs2, ax.x_con), true});
            }
            if (yv.grad) {
                // dY[con_y, free_y] += sum_{free_x} X * dOut
                const int64_t Mf = int64_t(ov.grad->size()) / Nf;
                run_mac({xv.ptr(), ov.grad->data(), yv.grad->data(),
                         axis_offsets(xv.shape, xs2, ax.x_con),
                         axis_offsets(xv.shape, xs2, ax.x_free), iota_scaled(Mf, Nf),
                         iota_scaled(Nf, 1), axis_offsets(yv.shape, ys2, ax.y_con),
                         axis_offsets(yv.shape, ys2, ax.y_free), true});
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

namespace {

enum class BinMode { Full, ScalarB };

BinMode binary_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape == b.shape) return BinMode::Full;
    if (b.size() == 1) return BinMode::ScalarB;
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape) + " do not match (need equal shapes or a scalar "
                     "second operand)");
}

}  // namespace

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    check_graph(this, {&a, &b});
    const BinMode mode = binary_mode(a, b, "add");
    Tensor out = zeros(a.shape);
    const int64_t n = a.size();
    const float* ap = a.ptr();
    const float* bp = b.ptr();
    float* op = out.mut();
    if (mode == BinMode::Full)
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
    else
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] + bp[0];
    if (recording_ && (a.requires_grad || b.requires_grad)) {
        prepare_output(out);
        Tensor av = a, bv = b, ov = out;
        register_node("add", out, [av, bv, ov, mode] {
            const auto& og = *ov.grad;
            if (av.grad)
                for (size_t i = 0; i < og.size(); ++i) (*av.grad)[i] += og[i];
            if (bv.grad) {
                if (mode == BinMode::Full)
                    for (size_t i = 0; i < og.size(); ++i) (*bv.grad)[i] += og[i];
                else {
                    double s = 0;
                    for (float g : og) s += g;
                    (*bv.grad)[0] += float(s);
                }
            }
        });
    }
    return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    check_graph(this, {&a, &b});
    const BinMode mode = binary_mode(a, b, "sub");
    Tensor out = zeros(a.shape);
    const int64_t n = a.size();
    const float* ap = a.ptr();
    const float* bp = b.ptr();
    float* op = out.mut();
    if (mode == BinMode::Full)
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] - bp[i];
    else
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] - bp[0];
    if (recording_ && (a.requires_grad || b.requires_grad)) {
        prepare_output(out);
        Tensor av = a, bv = b, ov = out;
        register_node("sub", out, [av, bv, ov, mode] {
            const auto& og = *ov.grad;
            if (av.grad)
                for (size_t i = 0; i < og.size(); ++i) (*av.grad)[i] += og[i];
            if (bv.grad) {
                if (mode == BinMode::Full)
                    for (size_t i = 0; i < og.size(); ++i) (*bv.grad)[i] -= og[i];
                else {
                    double s = 0;
                    for (float g : og) s += g;
                    (*bv.grad)[0] -= float(s);
                }
            }
        });
    }
    return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    check_graph(this, {&a, &b});
    const BinMode mode = binary_mode(a, b, "mul");
    Tensor out = zeros(a.shape);
    const int64_t n = a.size();
    const float* ap = a.ptr();
    const float* bp = b.ptr();
    float* op = out.mut();
    if (mode == BinMode::Full)
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] * bp[i];
    else
        for (int64_t i = 0; i < n; ++i) op[i] = ap[i] * bp[0];
    if (recording_ && (a.requires_grad || b.requires_grad)) {
        prepare_output(out);
        Tensor av = a, bv = b, ov = out;
        register_node("mul", out, [av, bv, ov, mode] {
            const auto& og = *ov.grad;
            const float* apc = av.ptr();
            const float* bpc = bv.ptr();
            if (av.grad) {
                if (mode == BinMode::Full)
                    for (size_t i = 0; i < og.size(); ++i) (*av.grad)[i] += og[i] * bpc[i];
                else
                    for (size_t i = 0; i < og.size(); ++i) (*av.grad)[i] += og[i] * bpc[0];
            }
            if (bv.grad) {
                if (mode == BinMode::Full)
                    for (size_t i = 0; i < og.size(); ++i) (*bv.grad)[i] += og[i] * apc[i];
                else {
                    double s = 0;
                    for (size_t i = 0; i < og.size(); ++i) s += double(og[i]) * double(apc[i]);
                    (*bv.grad)[0] += float(s);
                }
            }
        });
    }
    return out;
}

Tensor Graph::relu(const Tensor& x) {
    check_graph(this, {&x});
    Tensor out = zeros(x.shape);
    const int64_t n = x.size();
    const float* xp = x.ptr();
    float* op = out.mut();
    for (int64_t i = 0; i < n; ++i) op[i] = xp[i] > 0.0f ? xp[i] : 0.0f;
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("relu", out, [xv, ov] {
            const auto& og = *ov.grad;
            const float* xpc = xv.ptr();
            for (size_t i = 0; i < og.size(); ++i)
                if (xpc[i] > 0.0f) (*xv.grad)[i] += og[i];
        });
    }
    return out;
}

Tensor Graph::exp(const Tensor& x) {
    check_graph(this, {&x});
    Tensor out = zeros(x.shape);
    const int64_t n = x.size();
    const float* xp = x.ptr();
    float* op = out.mut();
    for (int64_t i = 0; i < n; ++i) op[i] = std::exp(xp[i]);
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("exp", out, [xv, ov] {
            const auto& og = *ov.grad;
            const float* opc = ov.ptr();
            for (size_t i = 0; i < og.size(); ++i) (*xv.grad)[i] += og[i] * opc[i];
        });
    }
    return out;
}

Tensor Graph::log(const Tensor& x) {
    check_graph(this, {&x});
    const int64_t n = x.size();
    const float* xp = x.ptr();
    for (int64_t i = 0; i < n; ++i)
        if (!(xp[i] > 0.0f))
            throw DomainError("log: nonpositive input " + std::to_string(xp[i]) +
                              " at flat index " + std::to_string(i));
    Tensor out = zeros(x.shape);
    float* op = out.mut();
    for (int64_t i = 0; i < n; ++i) op[i] = std::log(xp[i]);
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("log", out, [xv, ov] {
            const auto& og = *ov.grad;
            const float* xpc = xv.ptr();
            for (size_t i = 0; i < og.size(); ++i) (*xv.grad)[i] += og[i] / xpc[i];
        });
    }
    return out;
}

Tensor Graph::scale(const Tensor& x, double factor) {
    check_graph(this, {&x});
    Tensor out = zeros(x.shape);
    const int64_t n = x.size();
    const float* xp = x.ptr();
    float* op = out.mut();
    for (int64_t i = 0; i < n; ++i) op[i] = float(double(xp[i]) * factor);
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("scale", out, [xv, ov, factor] {
            const auto& og = *ov.grad;
            for (size_t i = 0; i < og.size(); ++i)
                (*xv.grad)[i] += float(double(og[i]) * factor);
        });
    }
    return out;
}

Tensor Graph::clamp(const Tensor& x, double lo, double hi) {
    check_graph(this, {&x});
    if (lo > hi) throw DomainError("clamp: lo > hi");
    Tensor out = zeros(x.shape);
    const int64_t n = x.size();
    const float* xp = x.ptr();
    float* op = out.mut();
    const float flo = float(lo), fhi = float(hi);
    for (int64_t i = 0; i < n; ++i) op[i] = std::min(std::max(xp[i], flo), fhi);
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("clamp", out, [xv, ov, flo, fhi] {
            const auto& og = *ov.grad;
            const float* xpc = xv.ptr();
            for (size_t i = 0; i < og.size(); ++i)
                if (xpc[i] > flo && xpc[i] < fhi) (*xv.grad)[i] += og[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

struct ReduceDims {
    int64_t outer, extent, inner;
    Shape out_shape;
};

ReduceDims reduce_dims(const Tensor& x, std::optional<int> axis, const char* op) {
    if (x.size() == 0) throw ShapeError(std::string(op) + ": empty tensor");
    ReduceDims r{1, 1, 1, {}};
    if (!axis) {
        r.extent = x.size();
        return r;
    }
    if (*axis < 0 || *axis >= x.rank())
        throw ShapeError(std::string(op) + ": axis " + std::to_string(*axis) +
                         " out of range for shape " + shape_str(x.shape));
    for (int a = 0; a < x.rank(); ++a) {
        if (a < *axis) r.outer *= x.shape[size_t(a)];
        else if (a == *axis) r.extent = x.shape[size_t(a)];
        else r.inner *= x.shape[size_t(a)];
        if (a != *axis) r.out_shape.push_back(x.shape[size_t(a)]);
    }
    return r;
}

}  // namespace

Tensor Graph::sum(const Tensor& x, std::optional<int> axis) {
    check_graph(this, {&x});
    const ReduceDims d = reduce_dims(x, axis, "sum");
    Tensor out = zeros(d.out_shape);
    const float* xp = x.ptr();
    float* op = out.mut();
    for (int64_t o = 0; o < d.outer; ++o)
        for (int64_t i = 0; i < d.inner; ++i) {
            double acc = 0.0;
            for (int64_t e = 0; e < d.extent; ++e)
                acc += xp[(o * d.extent + e) * d.inner + i];
            op[o * d.inner + i] = float(acc);
        }
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("sum", out, [xv, ov, d] {
            const auto& og = *ov.grad;
            for (int64_t o = 0; o < d.outer; ++o)
                for (int64_t e = 0; e < d.extent; ++e)
                    for (int64_t i = 0; i < d.inner; ++i)
                        (*xv.grad)[size_t((o * d.extent + e) * d.inner + i)] +=
                            og[size_t(o * d.inner + i)];
        });
    }
    return out;
}

Tensor Graph::mean(const Tensor& x, std::optional<int> axis) {
    check_graph(this, {&x});
    const ReduceDims d = reduce_dims(x, axis, "mean");
    Tensor out = zeros(d.out_shape);
    const float* xp = x.ptr();
    float* op = out.mut();
    const double inv = 1.0 / double(d.extent);
    for (int64_t o = 0; o < d.outer; ++o)
        for (int64_t i = 0; i < d.inner; ++i) {
            double acc = 0.0;
            for (int64_t e = 0; e < d.extent; ++e)
                acc += xp[(o * d.extent + e) * d.inner + i];
            op[o * d.inner + i] = float(acc * inv);
        }
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("mean", out, [xv, ov, d, inv] {
            const auto& og = *ov.grad;
            for (int64_t o = 0; o < d.outer; ++o)
                for (int64_t e = 0; e < d.extent; ++e)
                    for (int64_t i = 0; i < d.inner; ++i)
                        (*xv.grad)[size_t((o * d.extent + e) * d.inner + i)] +=
                            float(double(og[size_t(o * d.inner + i)]) * inv);
        });
    }
    return out;
}

Tensor Graph::max(const Tensor& x, std::optional<int> axis) {
    check_graph(this, {&x});
    const ReduceDims d = reduce_dims(x, axis, "max");
    Tensor out = zeros(d.out_shape);
    const float* xp = x.ptr();
    float* op = out.mut();
    auto argmax = std::make_shared<std::vector<int64_t>>(size_t(d.outer * d.inner));
    for (int64_t o = 0; o < d.outer; ++o)
        for (int64_t i = 0; i < d.inner; ++i) {
            int64_t best = (o * d.extent) * d.inner + i;
            float bv = xp[best];
            for (int64_t e = 1; e < d.extent; ++e) {
                const int64_t at = (o * d.extent + e) * d.inner + i;
                if (xp[at] > bv) {  // strict: keeps the first attaining index
                    bv = xp[at];
                    best = at;
                }
            }
            op[o * d.inner + i] = bv;
            (*argmax)[size_t(o * d.inner + i)] = best;
        }
    if (recording_ && x.requires_grad) {
        prepare_output(out);
        Tensor xv = x, ov = out;
        register_node("max", out, [xv, ov, argmax] {
            const auto& og = *ov.grad;
            for (size_t i = 0; i < og.size(); ++i) (*xv.grad)[size_t((*argmax)[i])] += og[i];
        });
    }
    return out;
}

Tensor Graph::reshape(const Tensor& x, Shape new_shape) {
    check_graph(this, {&x});
    check_extents(new_shape);
    if (numel(new_shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape) + " as " +
                         shape_str(new_shape));
    // A pure view: data and grad buffers are shared, so gradient routing
    // needs no tape node.
    Tensor out = x;
    out.shape = std::move(new_shape);
    return out;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
    if (!(h > 0)) throw DomainError("finite_diff_grad: h must be positive");
    Tensor probe = x.clone();
    Tensor g = zeros(x.shape);
    for (int64_t i = 0; i < x.size(); ++i) {
        const float orig = (*probe.data)[size_t(i)];
        const float plus = float(double(orig) + h);
        const float minus = float(double(orig) - h);
        (*probe.data)[size_t(i)] = plus;
        const double f1 = f(probe);
        (*probe.data)[size_t(i)] = minus;
        const double f2 = f(probe);
        (*probe.data)[size_t(i)] = orig;
        // Divide by the step actually applied after float32 rounding.
        (*g.data)[size_t(i)] = float((f1 - f2) / (double(plus) - double(minus)));
    }
    return g;
}

}  // namespace ttml
