#include "mo3tr/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mo3tr {

namespace {

constexpr double kPadCost = 1e9;

std::atomic<uint64_t> g_hungarian_calls{0};

void require_valid(const BBox& b, const char* who) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
        throw Error(ErrorKind::Geometry,
                    std::string(who) + ": box extents must be positive");
    }
}

} // namespace

double iou(const BBox& a, const BBox& b) {
    require_valid(a, "iou");
    require_valid(b, "iou");
    double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
    double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

double giou(const BBox& a, const BBox& b) {
    require_valid(a, "giou");
    require_valid(b, "giou");
    double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
    double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
    double inter = iw * ih;
    double uni = a.area() + b.area() - inter;
    double ew = std::max(a.right(), b.right()) - std::min(a.left(), b.left());
    double eh = std::max(a.bottom(), b.bottom()) - std::min(a.top(), b.top());
    double enclose = ew * eh;
    return inter / uni - (enclose - uni) / enclose;
}

double bbox_cost(const BBox& gt, const BBox& pred, const CostWeights& w) {
    double l1 = std::fabs(gt.cx - pred.cx) + std::fabs(gt.cy - pred.cy) +
                std::fabs(gt.w - pred.w) + std::fabs(gt.h - pred.h);
    return w.alpha_l1 * l1 + w.alpha_giou * (1.0 - giou(gt, pred));
}

double matching_cost(double pred_p_object, const BBox& gt, const BBox& pred,
                     const CostWeights& w) {
    return -pred_p_object + bbox_cost(gt, pred, w);
}

Assignment hungarian(const CostMatrix& c) {
    g_hungarian_calls.fetch_add(1, std::memory_order_relaxed);
    Assignment result;
    if (c.rows == 0 || c.cols == 0) return result;
    for (double v : c.values) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::Usage, "hungarian: costs must be finite");
        }
    }

    const int n = std::max(c.rows, c.cols);
    auto cost_at = [&](int r, int col) {
        return (r < c.rows && col < c.cols) ? c.at(r, col) : kPadCost;
    };

    // Shortest augmenting path formulation over the padded square matrix;
    // 1-based arrays with column 0 as the virtual root.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost_at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }

    for (int j = 1; j <= n; ++j) {
        int i = match[j];
        if (i >= 1 && i <= c.rows && j <= c.cols) {
            result.pairs.emplace_back(i - 1, j - 1);
        }
    }
    std::sort(result.pairs.begin(), result.pairs.end());
    // summed in row order so the total is reproducible bit for bit
    for (auto [r, col] : result.pairs) result.total_cost += c.at(r, col);
    return result;
}

uint64_t hungarian_call_count() {
    return g_hungarian_calls.load(std::memory_order_relaxed);
}

namespace {

Tensor box_col(const Tensor& b, int j) { return slice_cols(b, j, j + 1); }

} // namespace

Tensor giou_t(const Tensor& a, const Tensor& b) {
    Tensor half = Tensor::scalar(0.5);
    auto corners = [&](const Tensor& box) {
        Tensor cx = box_col(box, 0), cy = box_col(box, 1);
        Tensor w = box_col(box, 2), h = box_col(box, 3);
        Tensor hw = mul(w, half), hh = mul(h, half);
        return std::array<Tensor, 6>{sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh), w, h};
    };
    auto [al, at, ar, ab, aw, ah] = corners(a);
    auto [bl, bt, br, bb, bw, bh] = corners(b);

    Tensor zero = Tensor::scalar(0.0);
    Tensor iw = maximum(sub(minimum(ar, br), maximum(al, bl)), zero);
    Tensor ih = maximum(sub(minimum(ab, bb), maximum(at, bt)), zero);
    Tensor inter = mul(iw, ih);
    Tensor uni = sub(add(mul(aw, ah), mul(bw, bh)), inter);
    Tensor ew = sub(maximum(ar, br), minimum(al, bl));
    Tensor eh = sub(maximum(ab, bb), minimum(at, bt));
    Tensor enclose = mul(ew, eh);
    return sub(divide(inter, uni), divide(sub(enclose, uni), enclose));
}

Tensor bbox_cost_t(const Tensor& gt, const Tensor& pred, const CostWeights& w) {
    Tensor l1 = sum_all(abs_elems(sub(gt, pred)));
    Tensor giou_cost = sub(Tensor::scalar(1.0), giou_t(gt, pred));
    return add(mul_scalar(l1, w.alpha_l1), mul_scalar(giou_cost, w.alpha_giou));
}

} // namespace mo3tr
