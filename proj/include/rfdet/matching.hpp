// Optimal prediction/ground-truth assignment (Jonker-Volgenant shortest
// augmenting paths, O(n^3)) and the set-prediction loss: matched pairs pay a
// GIoU + L1 box term plus class cross-entropy, unmatched predictions pay a
// down-weighted no-object cross-entropy. The assignment itself is treated as
// a constant during backward.
#pragma once

#include "rfdet/autodiff.hpp"
#include "rfdet/geometry.hpp"
#include "rfdet/model.hpp"

namespace rfdet {

struct LossConfig {
  double lambda_iou = 2.0;
  double lambda_l1 = 5.0;
  double noobj_weight = 0.1;

  void validate() const {
    check(lambda_iou >= 0 && lambda_l1 >= 0 && noobj_weight >= 0,
          "loss: weights must be nonnegative");
  }
};

struct Assignment {
  // (pred_index, gt_index), one per ground truth, sorted by gt index.
  std::vector<std::pair<int, int>> pairs;
  double total_cost = 0;
};

// Minimum-cost assignment of M columns (ground truths) to J rows
// (predictions), M <= J. Columns are padded to a square matrix with zeros;
// padding columns absorb the unmatched rows at no cost.
inline Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  const int rows = static_cast<int>(cost.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(cost[0].size());
  if (cols > rows) throw ShapeError("hungarian: more ground truths than predictions");
  Assignment out;
  if (rows == 0 || cols == 0) return out;
  for (const auto& r : cost) {
    check(static_cast<int>(r.size()) == cols, "hungarian: ragged cost matrix");
    for (double c : r) check(std::isfinite(c), "hungarian: non-finite cost");
  }

  const int n = rows;  // square size after zero-padding the columns
  auto at = [&](int r, int c) { return c < cols ? cost[static_cast<size_t>(r)][static_cast<size_t>(c)] : 0.0; };

  // Column-wise shortest augmenting path with dual potentials. Indices are
  // 1-based with 0 as the virtual root.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n + 1), 0.0), v(static_cast<size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<size_t>(n + 1), false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = at(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  for (int j = 1; j <= cols; ++j) {
    const int r = p[static_cast<size_t>(j)] - 1;
    out.pairs.emplace_back(r, j - 1);
    out.total_cost += cost[static_cast<size_t>(r)][static_cast<size_t>(j - 1)];
  }
  return out;
}

inline Box3D box_from_corners24(const double* c24) {
  Box3D b;
  for (int c = 0; c < 8; ++c) b.corners[static_cast<size_t>(c)] = {c24[c * 3], c24[c * 3 + 1], c24[c * 3 + 2]};
  return b;
}

inline double box_loss(const Box3D& pred, const Box3D& gt, const LossConfig& cfg) {
  double l1 = 0;
  for (int c = 0; c < 8; ++c)
    for (int a = 0; a < 3; ++a)
      l1 += std::fabs(pred.corners[static_cast<size_t>(c)][a] - gt.corners[static_cast<size_t>(c)][a]);
  l1 /= 24.0;
  return cfg.lambda_iou * (1.0 - giou3d(pred, gt)) + cfg.lambda_l1 * l1;
}

inline double cross_entropy(const Array<double>& logits, int row, int cls) {
  const auto p = softmax_row(logits, row);
  return -std::log(p[static_cast<size_t>(cls)]);
}

inline double match_cost(const Detections& det, int j, const LabeledBox& gt,
                         const LossConfig& cfg) {
  return box_loss(detection_box(det, j), gt.box, cfg) + cross_entropy(det.logits, j, gt.class_id);
}

inline std::vector<std::vector<double>> match_cost_matrix(const Detections& det,
                                                          const std::vector<LabeledBox>& gts,
                                                          const LossConfig& cfg) {
  const int j_count = det.logits.shape[0];
  std::vector<std::vector<double>> cost(static_cast<size_t>(j_count),
                                        std::vector<double>(gts.size()));
  for (int j = 0; j < j_count; ++j)
    for (size_t m = 0; m < gts.size(); ++m)
      cost[static_cast<size_t>(j)][m] = match_cost(det, j, gts[m], cfg);
  return cost;
}

namespace detail {

// Componentwise extremum over the 8 corner rows of a {8,3} node.
template <class T>
Node<T>* corner_fold(Tape<T>& t, Node<T>* corners, bool want_max) {
  Node<T>* acc = slice(t, corners, {0, 0}, {1, 3});
  for (int c = 1; c < 8; ++c) {
    Node<T>* row = slice(t, corners, {c, 0}, {c + 1, 3});
    acc = want_max ? maximum(t, acc, row) : minimum(t, acc, row);
  }
  return acc;  // {1,3}
}

template <class T>
Node<T>* dims_product(Tape<T>& t, Node<T>* dims) {  // dims {1,3} -> {1,1}
  Node<T>* x = slice(t, dims, {0, 0}, {1, 1});
  x = mul(t, x, slice(t, dims, {0, 1}, {1, 2}));
  return mul(t, x, slice(t, dims, {0, 2}, {1, 3}));
}

}  // namespace detail

// Differentiable GIoU of a predicted corner row (node {1,24}) against a
// fixed ground-truth box, on the axis-aligned hulls of both corner sets.
template <class T>
Node<T>* giou_on_tape(Tape<T>& t, Node<T>* pred_row, const Box3D& gt) {
  Node<T>* corners = reshape(t, pred_row, {8, 3});
  Node<T>* plo = detail::corner_fold(t, corners, false);
  Node<T>* phi = detail::corner_fold(t, corners, true);

  auto [glo_v, ghi_v] = aabb(gt);
  Array<T> glo_a({1, 3}, {static_cast<T>(glo_v.x), static_cast<T>(glo_v.y), static_cast<T>(glo_v.z)});
  Array<T> ghi_a({1, 3}, {static_cast<T>(ghi_v.x), static_cast<T>(ghi_v.y), static_cast<T>(ghi_v.z)});
  Node<T>* glo = t.constant(glo_a, "gt_lo");
  Node<T>* ghi = t.constant(ghi_a, "gt_hi");

  Node<T>* inter_dims = relu(t, sub(t, minimum(t, phi, ghi), maximum(t, plo, glo)));
  Node<T>* inter = detail::dims_product(t, inter_dims);
  Node<T>* pred_vol = detail::dims_product(t, sub(t, phi, plo));
  Node<T>* gt_vol = detail::dims_product(t, sub(t, ghi, glo));
  Node<T>* uni = sub(t, add(t, pred_vol, gt_vol), inter);
  Node<T>* iou = div(t, inter, uni);  // union >= gt volume > 0

  Node<T>* hull_dims = sub(t, maximum(t, phi, ghi), minimum(t, plo, glo));
  Node<T>* hull = detail::dims_product(t, hull_dims);
  return sub(t, iou, div(t, sub(t, hull, uni), hull));  // {1,1}
}

template <class T>
Node<T>* box_loss_on_tape(Tape<T>& t, Node<T>* pred_row, const Box3D& gt,
                          const LossConfig& cfg) {
  Array<T> gt24 = Array<T>::zeros({1, 24});
  for (int c = 0; c < 8; ++c)
    for (int a = 0; a < 3; ++a)
      gt24[c * 3 + a] = static_cast<T>(gt.corners[static_cast<size_t>(c)][a]);
  Node<T>* l1 = mean(t, abs(t, sub(t, pred_row, t.constant(gt24, "gt_corners"))), {0, 1});
  Node<T>* giou = reshape(t, giou_on_tape(t, pred_row, gt), {1});
  Node<T>* one = t.constant(Array<T>::full({1}, T(1)), "one");
  return add(t, scalar_mul(t, sub(t, one, giou), static_cast<T>(cfg.lambda_iou)),
             scalar_mul(t, l1, static_cast<T>(cfg.lambda_l1)));
}

// The full set loss. Terms are accumulated in prediction-index order, so the
// result is bitwise invariant under any permutation of the ground-truth list
// (the optimal assignment re-optimizes to the same pairing).
template <class T>
Node<T>* hungarian_loss(Tape<T>& t, const typename Model<T>::Out& out,
                        const std::vector<LabeledBox>& gts, const LossConfig& cfg) {
  cfg.validate();
  const int j_count = out.boxes->value.shape[0];
  const int classes_with_null = out.logits->value.shape[1];
  check(static_cast<int>(gts.size()) <= j_count,
        "hungarian_loss: more ground truths than predictions");
  for (const auto& gt : gts)
    check(gt.class_id >= 0 && gt.class_id < classes_with_null - 1,
          "hungarian_loss: ground-truth class out of range");

  const Detections det = extract_detections<T>(out);
  const Assignment assign = hungarian(match_cost_matrix(det, gts, cfg));
  std::vector<int> gt_of(static_cast<size_t>(j_count), -1);
  for (const auto& [pj, gm] : assign.pairs) gt_of[static_cast<size_t>(pj)] = gm;

  Node<T>* log_probs = log(t, softmax(t, out.logits, 1));
  Node<T>* loss = t.constant(Array<T>::zeros({1}), "zero");
  for (int j = 0; j < j_count; ++j) {
    const int m = gt_of[static_cast<size_t>(j)];
    if (m >= 0) {
      Node<T>* row = slice(t, out.boxes, {j, 0}, {j + 1, 24});
      loss = add(t, loss, box_loss_on_tape(t, row, gts[static_cast<size_t>(m)].box, cfg));
      Node<T>* lp = slice(t, log_probs, {j, gts[static_cast<size_t>(m)].class_id},
                          {j + 1, gts[static_cast<size_t>(m)].class_id + 1});
      loss = add(t, loss, scalar_mul(t, reshape(t, lp, {1}), T(-1)));
    } else {
      Node<T>* lp = slice(t, log_probs, {j, classes_with_null - 1}, {j + 1, classes_with_null});
      loss = add(t, loss, scalar_mul(t, reshape(t, lp, {1}),
                                     static_cast<T>(-cfg.noobj_weight)));
    }
  }
  return loss;
}

}  // namespace rfdet
