#pragma once

// Independent reference computations used to check the production code.
// Everything here is deliberately written with plain loops over
// std::vector<double>, with no reliance on the tensor engine internals.

#include <cmath>
#include <cstdint>
#include <vector>

#include "mo3tr/tensor.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const mo3tr::Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (int i = 0; i < t.rows(); ++i)
        for (int j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

inline Mat naive_matmul(const Mat& a, const Mat& b) {
    Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b[0].size(); ++j)
            for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline std::vector<double> naive_softmax(const std::vector<double>& row) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    std::vector<double> out(row.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        out[i] = std::exp(row[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            d = std::max(d, std::fabs(a[i][j] - b[i][j]));
    return d;
}

// Central finite differences against tape gradients. make_loss must be a pure
// function of the given parameters; it is re-invoked per perturbed coordinate
// without a tape (values only).
struct GradCheck {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

template <typename LossFn>
GradCheck check_gradients(std::vector<mo3tr::Tensor> params, LossFn make_loss,
                          double step = 1e-6, int max_coords_per_param = -1,
                          double rel_floor = 1e-2) {
    std::vector<std::vector<double>> auto_grads;
    {
        for (auto& p : params) p.zero_grad();
        mo3tr::Tape tape;
        mo3tr::Tensor loss = make_loss();
        mo3tr::backward(loss);
        for (auto& p : params) {
            std::vector<double> g(p.size(), 0.0);
            if (p.has_grad()) {
                auto gs = p.grad();
                g.assign(gs.begin(), gs.end());
            }
            auto_grads.push_back(std::move(g));
        }
    }
    GradCheck result;
    mo3tr::Rng pick(12345);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto vals = params[pi].mutable_values();
        const std::size_t n = vals.size();
        std::size_t stride = 1;
        if (max_coords_per_param > 0 && n > static_cast<std::size_t>(max_coords_per_param)) {
            stride = n / max_coords_per_param;
        }
        std::size_t offset = stride > 1 ? pick.next_u64() % stride : 0;
        for (std::size_t ci = offset; ci < n; ci += stride) {
            const double orig = vals[ci];
            vals[ci] = orig + step;
            double up = make_loss().scalar_value();
            vals[ci] = orig - step;
            double down = make_loss().scalar_value();
            vals[ci] = orig;
            const double fd = (up - down) / (2.0 * step);
            const double ag = auto_grads[pi][ci];
            const double denom = std::max({std::fabs(fd), std::fabs(ag), rel_floor});
            result.max_rel_err = std::max(result.max_rel_err, std::fabs(fd - ag) / denom);
            ++result.coords_checked;
        }
    }
    return result;
}

} // namespace oracle
