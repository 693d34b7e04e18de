#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "mo3tr/errors.hpp"
#include "mo3tr/tensor.hpp"

namespace mo3tr {

// Normalized center-format box. Corner format appears only at file-I/O
// boundaries.
struct BBox {
    double cx = 0, cy = 0, w = 0, h = 0;

    static BBox from_corner(double left, double top, double width, double height) {
        return BBox{left + width / 2.0, top + height / 2.0, width, height};
    }
    double left() const { return cx - w / 2.0; }
    double top() const { return cy - h / 2.0; }
    double right() const { return cx + w / 2.0; }
    double bottom() const { return cy + h / 2.0; }
    double area() const { return w * h; }
};

struct CostWeights {
    double alpha_l1 = 5.0;
    double alpha_giou = 2.0;
};

double iou(const BBox& a, const BBox& b);

// IoU minus (enclosing area - union area) / enclosing area; in (-1, 1].
// Throws a geometry error for non-positive extents.
double giou(const BBox& a, const BBox& b);

// alpha_l1 * L1(coords) + alpha_giou * (1 - giou)
double bbox_cost(const BBox& gt, const BBox& pred, const CostWeights& w);

// -p_object + bbox_cost; pred_p_object is the predicted probability of the
// ground-truth (object) class. Used for assignment only, never as a loss.
double matching_cost(double pred_p_object, const BBox& gt, const BBox& pred,
                     const CostWeights& w);

struct CostMatrix {
    int rows = 0; // ground truth count
    int cols = 0; // prediction count
    std::vector<double> values; // row-major

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
    std::vector<std::pair<int, int>> pairs; // (gt index, pred index)
    double total_cost = 0;
};

// Exact minimum-cost bipartite assignment (Jonker-Volgenant style shortest
// augmenting paths). Rectangular matrices are padded internally with a high
// sentinel; padded pairs are stripped from the result. |pairs| = min(rows,
// cols). Ties resolve by deterministic scan order.
Assignment hungarian(const CostMatrix& c);

// Number of hungarian() invocations in this process. Lets tests assert that
// inference never solves an assignment problem.
uint64_t hungarian_call_count();

// Differentiable twins of the scalar box costs, for use inside losses. Boxes
// are [1x4] (cx, cy, w, h) tensors with positive extents.
Tensor giou_t(const Tensor& a, const Tensor& b);
Tensor bbox_cost_t(const Tensor& gt, const Tensor& pred, const CostWeights& w);

} // namespace mo3tr
