#include "mo3tr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

namespace mo3tr {

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw Error(ErrorKind::Numeric,
                        std::string("non-finite value produced by ") + op);
        }
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::Dimension,
                    std::string(op) + ": shape mismatch [" +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                        "] vs [" + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()) + "]");
    }
}

} // namespace

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Ordering: return "ordering";
        case ErrorKind::Lookup: return "lookup";
        case ErrorKind::Geometry: return "geometry";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Config: return "config";
        case ErrorKind::Data: return "data";
        case ErrorKind::Io: return "io";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Eval: return "eval";
    }
    return "unknown";
}

Tensor make_result(int rows, int cols, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->rows = rows;
    node->cols = cols;
    node->values.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
    if (rows <= 0 || cols <= 0) {
        throw Error(ErrorKind::Dimension, "tensor dimensions must be positive");
    }
    return make_result(rows, cols, requires_grad);
}

Tensor Tensor::full(int rows, int cols, double value, bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    std::fill(t.node()->values.begin(), t.node()->values.end(), value);
    return t;
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values,
                           bool requires_grad) {
    if (rows <= 0 || cols <= 0) {
        throw Error(ErrorKind::Dimension, "tensor dimensions must be positive");
    }
    if (values.size() != static_cast<std::size_t>(rows) * cols) {
        throw Error(ErrorKind::Dimension,
                    "value count " + std::to_string(values.size()) +
                        " does not match shape [" + std::to_string(rows) + "x" +
                        std::to_string(cols) + "]");
    }
    check_finite(values, "from_values");
    Tensor t = zeros(rows, cols, requires_grad);
    t.node()->values = std::move(values);
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_values(1, 1, {v}, requires_grad);
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double stddev, bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    for (double& x : t.node()->values) x = rng.normal(0.0, stddev);
    return t;
}

Tensor Tensor::xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = zeros(fan_in, fan_out, true);
    for (double& x : t.node()->values) x = rng.uniform(-bound, bound);
    return t;
}

double Tensor::scalar_value() const {
    if (rows() != 1 || cols() != 1) {
        throw Error(ErrorKind::Usage, "scalar_value on a non-scalar tensor");
    }
    return node_->values[0];
}

std::span<const double> Tensor::grad() const {
    if (node_->grad.empty()) {
        throw Error(ErrorKind::Usage, "grad accessed before backward populated it");
    }
    return node_->grad;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() {
    g_active_tape = prev_;
}

Tape* Tape::active() {
    return g_active_tape;
}

void Tape::run_backward() {
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw Error(ErrorKind::Usage, "backward requires a scalar loss");
    }
    Tape* tape = Tape::active();
    if (tape == nullptr) {
        throw Error(ErrorKind::Usage, "backward called without an active tape");
    }
    auto node = loss.node();
    node->ensure_grad();
    node->grad[0] = 1.0;
    tape->run_backward();
}

namespace {

bool tracking(const Tensor& a) {
    return Tape::active() != nullptr && a.requires_grad();
}

bool tracking(const Tensor& a, const Tensor& b) {
    return Tape::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

// Shared wiring for elementwise binary ops: dval_a/dval_b map (grad_out, a, b)
// index-wise onto input grads.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* op,
                          Fwd fwd, BwdA bwd_a, BwdB bwd_b) {
    require_same_shape(a, b, op);
    Tensor out = make_result(a.rows(), a.cols(), tracking(a, b));
    const auto& av = a.node()->values;
    const auto& bv = b.node()->values;
    auto& ov = out.node()->values;
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i], bv[i]);
    check_finite(ov, op);
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        bool need_a = a.requires_grad(), need_b = b.requires_grad();
        Tape::active()->record([an, bn, on, need_a, need_b, bwd_a, bwd_b]() {
            if (on->grad.empty()) return;
            if (need_a) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    an->grad[i] += bwd_a(on->grad[i], an->values[i], bn->values[i]);
            }
            if (need_b) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    bn->grad[i] += bwd_b(on->grad[i], an->values[i], bn->values[i]);
            }
        });
    }
    return out;
}

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(const Tensor& a, const char* op, Fwd fwd, Bwd bwd) {
    Tensor out = make_result(a.rows(), a.cols(), tracking(a));
    const auto& av = a.node()->values;
    auto& ov = out.node()->values;
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i]);
    check_finite(ov, op);
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, bwd]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (std::size_t i = 0; i < on->grad.size(); ++i)
                an->grad[i] += bwd(on->grad[i], an->values[i], on->values[i]);
        });
    }
    return out;
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::Dimension,
                    "matmul: inner dimensions disagree [" + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()) + "] * [" +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + "]");
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_result(m, n, tracking(a, b));
    const double* av = a.node()->values.data();
    const double* bv = b.node()->values.data();
    double* ov = out.node()->values.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = av + static_cast<std::size_t>(i) * k;
        double* orow = ov + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double s = arow[l];
            const double* brow = bv + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) orow[j] += s * brow[j];
        }
    }
    check_finite(out.node()->values, "matmul");
    if (out.requires_grad()) {
        auto an = a.node(), bn = b.node(), on = out.node();
        bool need_a = a.requires_grad(), need_b = b.requires_grad();
        Tape::active()->record([an, bn, on, need_a, need_b, m, k, n]() {
            if (on->grad.empty()) return;
            const double* g = on->grad.data();
            if (need_a) {
                an->ensure_grad();
                double* da = an->grad.data();
                const double* bv2 = bn->values.data();
                // dA[i][l] += sum_j g[i][j] * B[l][j]
                for (int i = 0; i < m; ++i) {
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    double* darow = da + static_cast<std::size_t>(i) * k;
                    for (int l = 0; l < k; ++l) {
                        const double* brow = bv2 + static_cast<std::size_t>(l) * n;
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        darow[l] += acc;
                    }
                }
            }
            if (need_b) {
                bn->ensure_grad();
                double* db = bn->grad.data();
                const double* av2 = an->values.data();
                // dB[l][j] += sum_i A[i][l] * g[i][j]
                for (int i = 0; i < m; ++i) {
                    const double* arow = av2 + static_cast<std::size_t>(i) * k;
                    const double* grow = g + static_cast<std::size_t>(i) * n;
                    for (int l = 0; l < k; ++l) {
                        const double s = arow[l];
                        double* dbrow = db + static_cast<std::size_t>(l) * n;
                        for (int j = 0; j < n; ++j) dbrow[j] += s * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = make_result(n, m, tracking(a));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.node()->values[static_cast<std::size_t>(j) * m + i] = a.at(i, j);
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, m, n]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + j] +=
                        on->grad[static_cast<std::size_t>(j) * m + i];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; },
        [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; },
        [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "divide", [](double x, double y) { return x / y; },
        [](double g, double, double y) { return g / y; },
        [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    // Ties route the gradient to the first argument.
    return elementwise_binary(
        a, b, "minimum", [](double x, double y) { return x <= y ? x : y; },
        [](double g, double x, double y) { return x <= y ? g : 0.0; },
        [](double g, double x, double y) { return x <= y ? 0.0 : g; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        a, b, "maximum", [](double x, double y) { return x >= y ? x : y; },
        [](double g, double x, double y) { return x >= y ? g : 0.0; },
        [](double g, double x, double y) { return x >= y ? 0.0 : g; });
}

Tensor relu(const Tensor& a) {
    return elementwise_unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor abs_elems(const Tensor& a) {
    return elementwise_unary(
        a, "abs_elems", [](double x) { return std::fabs(x); },
        [](double g, double x, double) { return x > 0.0 ? g : (x < 0.0 ? -g : 0.0); });
}

Tensor sigmoid(const Tensor& a) {
    return elementwise_unary(
        a, "sigmoid",
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor log_elems(const Tensor& a) {
    return elementwise_unary(
        a, "log_elems", [](double x) { return std::log(x); },
        [](double g, double x, double) { return g / x; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return elementwise_unary(
        a, "mul_scalar", [s](double x) { return x * s; },
        [s](double g, double, double) { return g * s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return elementwise_unary(
        a, "add_scalar", [s](double x) { return x + s; },
        [](double g, double, double) { return g; });
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
    if (bias.rows() != 1 || bias.cols() != a.cols()) {
        throw Error(ErrorKind::Dimension,
                    "add_row_bias: bias must be [1x" + std::to_string(a.cols()) +
                        "], got [" + std::to_string(bias.rows()) + "x" +
                        std::to_string(bias.cols()) + "]");
    }
    const int m = a.rows(), n = a.cols();
    Tensor out = make_result(m, n, tracking(a, bias));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.node()->values[static_cast<std::size_t>(i) * n + j] =
                a.at(i, j) + bias.at(0, j);
    check_finite(out.node()->values, "add_row_bias");
    if (out.requires_grad()) {
        auto an = a.node(), bn = bias.node(), on = out.node();
        bool need_a = a.requires_grad(), need_b = bias.requires_grad();
        Tape::active()->record([an, bn, on, need_a, need_b, m, n]() {
            if (on->grad.empty()) return;
            if (need_a) {
                an->ensure_grad();
                for (std::size_t i = 0; i < on->grad.size(); ++i)
                    an->grad[i] += on->grad[i];
            }
            if (need_b) {
                bn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        bn->grad[j] += on->grad[static_cast<std::size_t>(i) * n + j];
            }
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    if (n < 1) {
        throw Error(ErrorKind::Dimension, "softmax_rows: empty row dimension");
    }
    Tensor out = make_result(m, n, tracking(a));
    for (int i = 0; i < m; ++i) {
        const double* row = a.node()->values.data() + static_cast<std::size_t>(i) * n;
        double* orow = out.node()->values.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= sum;
    }
    check_finite(out.node()->values, "softmax_rows");
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, m, n]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* y = on->values.data() + static_cast<std::size_t>(i) * n;
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * n;
                double* da = an->grad.data() + static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += g[j] * y[j];
                for (int j = 0; j < n; ++j) da[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

Tensor log_softmax_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    if (n < 1) {
        throw Error(ErrorKind::Dimension, "log_softmax_rows: empty row dimension");
    }
    Tensor out = make_result(m, n, tracking(a));
    for (int i = 0; i < m; ++i) {
        const double* row = a.node()->values.data() + static_cast<std::size_t>(i) * n;
        double* orow = out.node()->values.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
        double lse = mx + std::log(sum);
        for (int j = 0; j < n; ++j) orow[j] = row[j] - lse;
    }
    check_finite(out.node()->values, "log_softmax_rows");
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, m, n]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* y = on->values.data() + static_cast<std::size_t>(i) * n;
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * n;
                double* da = an->grad.data() + static_cast<std::size_t>(i) * n;
                double gsum = 0.0;
                for (int j = 0; j < n; ++j) gsum += g[j];
                for (int j = 0; j < n; ++j) da[j] += g[j] - std::exp(y[j]) * gsum;
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int m = x.rows(), n = x.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
        throw Error(ErrorKind::Dimension, "layer_norm: gain/bias must be [1x" +
                                              std::to_string(n) + "]");
    }
    Tensor out = make_result(m, n, tracking(x) || (Tape::active() && (gain.requires_grad() || bias.requires_grad())));
    // Normalized rows are re-derived in backward; keep only mean and inv-std.
    std::vector<double> mean(m), inv_std(m);
    for (int i = 0; i < m; ++i) {
        const double* row = x.node()->values.data() + static_cast<std::size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += row[j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= n;
        mean[i] = mu;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        double* orow = out.node()->values.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j)
            orow[j] = (row[j] - mu) * inv_std[i] * gain.at(0, j) + bias.at(0, j);
    }
    check_finite(out.node()->values, "layer_norm");
    if (out.requires_grad()) {
        auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
        bool need_x = x.requires_grad(), need_g = gain.requires_grad(), need_b = bias.requires_grad();
        Tape::active()->record([xn, gn, bn, on, need_x, need_g, need_b, m, n,
                                mean = std::move(mean), inv_std = std::move(inv_std)]() {
            if (on->grad.empty()) return;
            if (need_g) gn->ensure_grad();
            if (need_b) bn->ensure_grad();
            if (need_x) xn->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* xrow = xn->values.data() + static_cast<std::size_t>(i) * n;
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * n;
                const double is = inv_std[i];
                const double mu = mean[i];
                if (need_g)
                    for (int j = 0; j < n; ++j)
                        gn->grad[j] += g[j] * (xrow[j] - mu) * is;
                if (need_b)
                    for (int j = 0; j < n; ++j) bn->grad[j] += g[j];
                if (need_x) {
                    // dxhat = g * gain; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int j = 0; j < n; ++j) {
                        double xhat = (xrow[j] - mu) * is;
                        double dxhat = g[j] * gn->values[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    double mean_dxhat = sum_dxhat / n;
                    double mean_dxhat_xhat = sum_dxhat_xhat / n;
                    double* dx = xn->grad.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        double xhat = (xrow[j] - mu) * is;
                        double dxhat = g[j] * gn->values[j];
                        dx[j] += is * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    }
                }
            }
        });
    }
    return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw Error(ErrorKind::Dimension, "concat_rows: no parts");
    }
    const int n = parts[0].cols();
    int total = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        if (p.cols() != n) {
            throw Error(ErrorKind::Dimension, "concat_rows: column mismatch");
        }
        total += p.rows();
        track = track || p.requires_grad();
    }
    Tensor out = make_result(total, n, Tape::active() != nullptr && track);
    int r = 0;
    for (const Tensor& p : parts) {
        std::copy(p.node()->values.begin(), p.node()->values.end(),
                  out.node()->values.begin() + static_cast<std::size_t>(r) * n);
        r += p.rows();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        Tape::active()->record([nodes = std::move(nodes), on, n]() {
            if (on->grad.empty()) return;
            int r2 = 0;
            for (auto& pn : nodes) {
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (std::size_t i = 0; i < pn->values.size(); ++i)
                        pn->grad[i] += on->grad[static_cast<std::size_t>(r2) * n + i];
                }
                r2 += pn->rows;
            }
        });
    }
    return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw Error(ErrorKind::Dimension, "concat_cols: no parts");
    }
    const int m = parts[0].rows();
    int total = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        if (p.rows() != m) {
            throw Error(ErrorKind::Dimension, "concat_cols: row mismatch");
        }
        total += p.cols();
        track = track || p.requires_grad();
    }
    Tensor out = make_result(m, total, Tape::active() != nullptr && track);
    int c = 0;
    for (const Tensor& p : parts) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p.cols(); ++j)
                out.node()->values[static_cast<std::size_t>(i) * total + c + j] = p.at(i, j);
        c += p.cols();
    }
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<TensorNode>> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& p : parts) nodes.push_back(p.node());
        auto on = out.node();
        Tape::active()->record([nodes = std::move(nodes), on, m, total]() {
            if (on->grad.empty()) return;
            int c2 = 0;
            for (auto& pn : nodes) {
                if (pn->requires_grad) {
                    pn->ensure_grad();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < pn->cols; ++j)
                            pn->grad[static_cast<std::size_t>(i) * pn->cols + j] +=
                                on->grad[static_cast<std::size_t>(i) * total + c2 + j];
                }
                c2 += pn->cols;
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
    if (begin < 0 || end > a.rows() || begin >= end) {
        throw Error(ErrorKind::Dimension,
                    "slice_rows: range [" + std::to_string(begin) + "," +
                        std::to_string(end) + ") invalid for " +
                        std::to_string(a.rows()) + " rows");
    }
    const int n = a.cols(), m = end - begin;
    Tensor out = make_result(m, n, tracking(a));
    std::copy(a.node()->values.begin() + static_cast<std::size_t>(begin) * n,
              a.node()->values.begin() + static_cast<std::size_t>(end) * n,
              out.node()->values.begin());
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, begin, n, m]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (std::size_t i = 0; i < static_cast<std::size_t>(m) * n; ++i)
                an->grad[static_cast<std::size_t>(begin) * n + i] += on->grad[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
    if (begin < 0 || end > a.cols() || begin >= end) {
        throw Error(ErrorKind::Dimension,
                    "slice_cols: range [" + std::to_string(begin) + "," +
                        std::to_string(end) + ") invalid for " +
                        std::to_string(a.cols()) + " cols");
    }
    const int m = a.rows(), n = a.cols(), w = end - begin;
    Tensor out = make_result(m, w, tracking(a));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j)
            out.node()->values[static_cast<std::size_t>(i) * w + j] = a.at(i, begin + j);
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on, begin, m, n, w]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + begin + j] +=
                        on->grad[static_cast<std::size_t>(i) * w + j];
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    Tensor out = make_result(1, 1, tracking(a));
    double acc = 0.0;
    for (double v : a.node()->values) acc += v;
    out.node()->values[0] = acc;
    check_finite(out.node()->values, "sum_all");
    if (out.requires_grad()) {
        auto an = a.node(), on = out.node();
        Tape::active()->record([an, on]() {
            if (on->grad.empty()) return;
            an->ensure_grad();
            for (double& g : an->grad) g += on->grad[0];
        });
    }
    return out;
}

} // namespace mo3tr
