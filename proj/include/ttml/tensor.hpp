#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ttml/errors.hpp"

namespace ttml {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::vector<int64_t> row_major_strides(const Shape& shape);
std::string shape_str(const Shape& shape);

// Thread-local multiply-accumulate counter, incremented by the contraction
// and convolution kernels. The bench module and the FLOP assertions read it
// around the region of interest.
uint64_t mac_count();
void reset_mac_count();
void add_macs(uint64_t n);

// Worker threads the contraction kernel may fan out to. Each output element
// is accumulated start-to-finish by one thread, so results are bitwise
// identical for every thread count.
void set_num_threads(int n);
int num_threads();

class Graph;

// Dense row-major float32 array. Copies share the underlying buffers, so a
// Tensor acts as a handle to (data, grad); clone() makes a deep copy.
struct Tensor {
    Shape shape;
    std::shared_ptr<std::vector<float>> data;
    std::shared_ptr<std::vector<float>> grad;  // non-null iff requires_grad
    bool requires_grad = false;
    Graph* graph = nullptr;  // tape that produced this tensor, if recorded
    int node = -1;

    Tensor() = default;

    int64_t size() const { return data ? int64_t(data->size()) : 0; }
    int rank() const { return int(shape.size()); }
    bool defined() const { return data != nullptr; }
    float item() const;

    const float* ptr() const { return data->data(); }
    float* mut() { return data->data(); }
    float at(int64_t i) const { return (*data)[size_t(i)]; }

    void set_requires_grad(bool on);
    void zero_grad();
    Tensor detached() const;  // shares data, drops grad and graph linkage
    Tensor clone() const;     // deep copy of data; no grad, no graph
};

Tensor zeros(Shape shape);
Tensor full(Shape shape, float value);
Tensor from_vec(Shape shape, std::vector<float> values);
Tensor scalar_tensor(float value);

struct AxisPair {
    int x_axis;
    int y_axis;
};

// Reverse-mode tape. Nodes are appended in execution order and backward()
// replays them exactly once each, in reverse. A Graph and the tensors it
// produced are confined to one thread.
class Graph {
 public:
    explicit Graph(bool record = true) : recording_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }
    size_t node_count() const { return tape_.size(); }

    // Sum over the paired axes; output shape is the free axes of x followed
    // by the free axes of y. An empty pair list is the outer product.
    Tensor contract(const Tensor& x, const Tensor& y, const std::vector<AxisPair>& axes);

    // Elementwise. Binary kinds take identical shapes or a single-element
    // second operand; there is no other broadcasting.
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor relu(const Tensor& x);
    Tensor exp(const Tensor& x);
    Tensor log(const Tensor& x);
    Tensor scale(const Tensor& x, double factor);
    Tensor clamp(const Tensor& x, double lo, double hi);

    // Reductions; no axis reduces everything to a rank-0 scalar. max routes
    // its gradient to the first attaining element.
    Tensor sum(const Tensor& x, std::optional<int> axis = std::nullopt);
    Tensor mean(const Tensor& x, std::optional<int> axis = std::nullopt);
    Tensor max(const Tensor& x, std::optional<int> axis = std::nullopt);

    // Reinterprets the shape. Data and gradient share storage with x, so no
    // tape node is needed; element order is untouched.
    Tensor reshape(const Tensor& x, Shape new_shape);

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
    // accumulate additively into every recorded requires-grad tensor.
    void backward(const Tensor& loss);

    // Op-author hooks. When some input requires grad: prepare_output() gives
    // `out` a zeroed grad buffer and ties it to this graph; the closure is
    // then built over a copy of the prepared tensor and recorded with
    // register_node (it reads out.grad and accumulates into input grads).
    void prepare_output(Tensor& out);
    void register_node(const char* kind, Tensor& out, std::function<void()> backward_fn);

 private:
    struct Node {
        const char* kind;
        std::function<void()> backward_fn;
    };
    std::vector<Node> tape_;
    bool recording_;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per element.
// Forward evaluations only; this is the gradient oracle for backward().
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h);

}  // namespace ttml
