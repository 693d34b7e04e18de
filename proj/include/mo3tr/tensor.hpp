#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mo3tr/errors.hpp"
#include "mo3tr/rng.hpp"

namespace mo3tr {

// All tensors are 2-D (rows x cols), row-major, 64-bit. Scalars are 1x1.
// There is no broadcasting beyond the explicit *_scalar and add_row_bias ops.
struct TensorNode {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;
    std::vector<double> grad; // allocated on first accumulation
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(int rows, int cols, bool requires_grad = false);
    static Tensor full(int rows, int cols, double value, bool requires_grad = false);
    static Tensor from_values(int rows, int cols, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(int rows, int cols, Rng& rng, double stddev,
                        bool requires_grad = false);
    // Uniform in +-sqrt(6 / (fan_in + fan_out)), shape [fan_in x fan_out].
    static Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng);

    bool valid() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    std::size_t size() const { return node_->values.size(); }

    std::span<const double> values() const { return node_->values; }
    // Direct write access for optimizers and loaders; never recorded on a tape.
    std::span<double> mutable_values() { return node_->values; }

    double at(int r, int c) const { return node_->values[static_cast<std::size_t>(r) * node_->cols + c]; }
    double scalar_value() const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;

    friend Tensor make_result(int, int, bool);
};

// Define-by-run tape. Constructing a Tape makes it the active tape for the
// current thread; ops record backward steps onto it while at least one input
// requires grad. Tapes nest (the innermost wins) and are strictly
// single-threaded.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
    std::size_t num_steps() const { return steps_.size(); }

    // Runs recorded steps in reverse construction order, exactly once each.
    void run_backward();

private:
    std::vector<std::function<void()>> steps_;
    Tape* prev_ = nullptr;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor abs_elems(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_elems(const Tensor& a);
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// bias is [1 x cols], added to every row.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
// Normalizes each row to zero mean / unit variance, then applies learnable
// gain and bias (both [1 x cols]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor slice_cols(const Tensor& a, int begin, int end);
Tensor sum_all(const Tensor& a); // 1x1

// Seeds d(loss)/d(loss) = 1 and propagates through the active tape. The loss
// must be a 1x1 tensor recorded on the innermost active tape.
void backward(const Tensor& loss);

} // namespace mo3tr
