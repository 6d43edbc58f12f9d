#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnsynth/rnn.hpp"

namespace rnnsynth {

class ClusterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// No clear separation between clusters: the representation is continuous.
class ContinuousError : public ClusterError {
 public:
  using ClusterError::ClusterError;
};

struct ClusterConfig {
  double gap_ratio = 5.0;      // required ratio at the merge-distance cut
  double single_cluster_diameter = 0.1;
  int max_points = 4096;       // subsample bound for the linkage pass
  int max_clusters = 64;
};

struct Clusters {
  Eigen::MatrixXd centers;      // n x K
  std::vector<int> membership;  // per trace point
  double max_radius = 0.0;      // largest point-to-center distance
  double min_center_gap = 0.0;
  double cut_ratio = 0.0;
};

// Single-linkage agglomeration (via a minimum spanning tree) cut at the
// largest relative gap in merge distances.
inline Clusters cluster_states(const HiddenTrace& trace,
                               const ClusterConfig& cfg = {}) {
  const auto total = static_cast<int>(trace.states.cols());
  if (total == 0) throw ClusterError("cluster_states: empty trace");
  const int n = static_cast<int>(trace.states.rows());

  // deterministic stride subsample
  std::vector<int> pick;
  const int stride = std::max(1, (total + cfg.max_points - 1) / cfg.max_points);
  for (int j = 0; j < total; j += stride) pick.push_back(j);
  const int m = static_cast<int>(pick.size());
  Eigen::MatrixXd pts(n, m);
  for (int j = 0; j < m; ++j)
    pts.col(j) = trace.states.col(pick[static_cast<std::size_t>(j)]);

  // Prim MST
  std::vector<double> dist(static_cast<std::size_t>(m),
                           std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(m), -1);
  std::vector<bool> in_tree(static_cast<std::size_t>(m), false);
  std::vector<double> edges;
  std::vector<std::pair<int, int>> edge_ends;
  dist[0] = 0.0;
  for (int it = 0; it < m; ++it) {
    int u = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j)
      if (!in_tree[static_cast<std::size_t>(j)] &&
          dist[static_cast<std::size_t>(j)] < best) {
        best = dist[static_cast<std::size_t>(j)];
        u = j;
      }
    in_tree[static_cast<std::size_t>(u)] = true;
    if (parent[static_cast<std::size_t>(u)] >= 0) {
      edges.push_back(best);
      edge_ends.emplace_back(parent[static_cast<std::size_t>(u)], u);
    }
    for (int j = 0; j < m; ++j)
      if (!in_tree[static_cast<std::size_t>(j)]) {
        const double d = (pts.col(j) - pts.col(u)).norm();
        if (d < dist[static_cast<std::size_t>(j)]) {
          dist[static_cast<std::size_t>(j)] = d;
          parent[static_cast<std::size_t>(j)] = u;
        }
      }
  }

  std::vector<double> sorted = edges;
  std::sort(sorted.begin(), sorted.end());
  const auto ecount = static_cast<int>(sorted.size());

  // largest relative gap between consecutive merge distances
  double best_ratio = 0.0;
  int cut_index = ecount;  // edges >= sorted[cut_index] removed
  for (int i = 0; i + 1 < ecount; ++i) {
    const double lo = sorted[static_cast<std::size_t>(i)];
    const double hi = sorted[static_cast<std::size_t>(i + 1)];
    if (hi <= 0) continue;
    const double ratio = hi / std::max(lo, hi * 1e-12);
    const int k = ecount - (i + 1) + 1;  // clusters if we cut here
    if (k > cfg.max_clusters) continue;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      cut_index = i + 1;
    }
  }

  Clusters out;
  out.cut_ratio = best_ratio;
  double diameter = 0.0;
  for (int j = 0; j < m; ++j)
    diameter = std::max(diameter, (pts.col(j) - pts.col(0)).norm());

  int k = 1;
  double threshold = std::numeric_limits<double>::infinity();
  if (best_ratio >= cfg.gap_ratio && cut_index < ecount) {
    threshold = 0.5 * (sorted[static_cast<std::size_t>(cut_index - 1)] +
                       sorted[static_cast<std::size_t>(cut_index)]);
    k = ecount - cut_index + 1;
  } else {
    if (diameter > cfg.single_cluster_diameter)
      throw ContinuousError(
          "cluster_states: no separation gap; representation looks "
          "continuous");
    k = 1;
  }

  // connected components of the MST with long edges removed
  std::vector<int> comp(static_cast<std::size_t>(m), -1);
  {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (edges[e] < threshold) {
        adj[static_cast<std::size_t>(edge_ends[e].first)].push_back(edge_ends[e].second);
        adj[static_cast<std::size_t>(edge_ends[e].second)].push_back(edge_ends[e].first);
      }
    int next = 0;
    for (int s = 0; s < m; ++s) {
      if (comp[static_cast<std::size_t>(s)] >= 0) continue;
      std::vector<int> stack{s};
      comp[static_cast<std::size_t>(s)] = next;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[static_cast<std::size_t>(u)])
          if (comp[static_cast<std::size_t>(v)] < 0) {
            comp[static_cast<std::size_t>(v)] = next;
            stack.push_back(v);
          }
      }
      ++next;
    }
    k = next;
  }

  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(n, k);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int j = 0; j < m; ++j) {
    centers.col(comp[static_cast<std::size_t>(j)]) += pts.col(j);
    ++sizes[static_cast<std::size_t>(comp[static_cast<std::size_t>(j)])];
  }
  for (int c = 0; c < k; ++c) centers.col(c) /= std::max(1, sizes[static_cast<std::size_t>(c)]);

  // deterministic center order: lexicographic by coordinates
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (int i = 0; i < n; ++i) {
      if (centers(i, a) < centers(i, b) - 1e-12) return true;
      if (centers(i, a) > centers(i, b) + 1e-12) return false;
    }
    return false;
  });
  out.centers.resize(n, k);
  for (int c = 0; c < k; ++c) out.centers.col(c) = centers.col(order[static_cast<std::size_t>(c)]);

  // assign every trace point to its nearest center
  out.membership.resize(static_cast<std::size_t>(total));
  for (int j = 0; j < total; ++j) {
    int bestc = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = (trace.states.col(j) - out.centers.col(c)).norm();
      if (d < bestd) {
        bestd = d;
        bestc = c;
      }
    }
    out.membership[static_cast<std::size_t>(j)] = bestc;
    out.max_radius = std::max(out.max_radius, bestd);
  }
  out.min_center_gap = std::numeric_limits<double>::infinity();
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      out.min_center_gap =
          std::min(out.min_center_gap, (out.centers.col(a) - out.centers.col(b)).norm());
  if (k > 1 && out.max_radius * 2.0 >= out.min_center_gap)
    throw ClusterError("cluster_states: clusters overlap their separation");
  return out;
}

// ---- Boolean codebook -----------------------------------------------------------

struct BitCodebook {
  Eigen::MatrixXd centers;          // n x 2^b, cluster order
  std::vector<unsigned> assignment; // cluster index -> b-bit code
  int bits = 0;
  bool heuristic = false;  // true when the assignment search was greedy

  std::vector<long long> encode(const Eigen::VectorXd& h) const {
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (int c = 0; c < centers.cols(); ++c) {
      const double d = (h - centers.col(c)).norm();
      if (d < bestd) {
        bestd = d;
        best = c;
      }
    }
    const unsigned code = assignment[static_cast<std::size_t>(best)];
    std::vector<long long> out(static_cast<std::size_t>(bits));
    for (int i = 0; i < bits; ++i)
      out[static_cast<std::size_t>(i)] = (code >> i) & 1u;
    return out;
  }
};

struct BooleanAssignConfig {
  int exhaustive_bits = 3;  // (2^b)! enumeration up to here
  int max_bits = 6;
};

// Scores a candidate codebook by the character count of the end-to-end
// synthesized program; SIZE_MAX marks an unusable assignment.
using CodebookScorer = std::function<std::size_t(const BitCodebook&)>;

inline BitCodebook boolean_assign(const Clusters& clusters,
                                  const CodebookScorer& scorer,
                                  const BooleanAssignConfig& cfg = {}) {
  const auto k = static_cast<unsigned>(clusters.centers.cols());
  if (k == 0 || (k & (k - 1)) != 0)
    throw ClusterError("boolean_assign: cluster count is not a power of two");
  int bits = 0;
  while ((1u << bits) < k) ++bits;
  if (bits > cfg.max_bits)
    throw ClusterError("boolean_assign: too many bits (" +
                       std::to_string(bits) + ")");

  BitCodebook best;
  best.centers = clusters.centers;
  best.bits = bits;
  std::size_t best_score = std::numeric_limits<std::size_t>::max();

  auto try_assignment = [&](const std::vector<unsigned>& assign) {
    BitCodebook cb;
    cb.centers = clusters.centers;
    cb.bits = bits;
    cb.assignment = assign;
    const std::size_t score = scorer(cb);
    if (score < best_score) {
      best_score = score;
      best.assignment = assign;
    }
  };

  std::vector<unsigned> assign(k);
  std::iota(assign.begin(), assign.end(), 0u);
  if (bits <= cfg.exhaustive_bits) {
    // lexicographic enumeration; ties keep the first (smallest) assignment
    do {
      try_assignment(assign);
    } while (std::next_permutation(assign.begin(), assign.end()));
  } else {
    best.heuristic = true;
    try_assignment(assign);
    bool improved = true;
    int passes = 0;
    while (improved && passes++ < 32) {
      improved = false;
      for (unsigned i = 0; i < k; ++i)
        for (unsigned j = i + 1; j < k; ++j) {
          std::vector<unsigned> cand = best.assignment;
          std::swap(cand[i], cand[j]);
          BitCodebook cb;
          cb.centers = clusters.centers;
          cb.bits = bits;
          cb.assignment = cand;
          const std::size_t score = scorer(cb);
          if (score < best_score) {
            best_score = score;
            best.assignment = cand;
            improved = true;
          }
        }
    }
  }
  if (best.assignment.empty() ||
      best_score == std::numeric_limits<std::size_t>::max())
    throw ClusterError("boolean_assign: no usable assignment");
  return best;
}

}  // namespace rnnsynth
