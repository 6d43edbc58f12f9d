#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rnnsynth {

class JordanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class GroupingError : public JordanError {
 public:
  using JordanError::JordanError;
};
class KernelConsistencyError : public JordanError {
 public:
  using JordanError::JordanError;
};

enum class BlockKind { kReal, kRotation };

struct JordanBlock {
  int start = 0;        // first row/column in J
  int rows = 0;         // rows occupied (depth for real, 2*depth for rotation)
  int depth = 1;        // chain length
  std::complex<double> lambda;
  BlockKind kind = BlockKind::kReal;
};

// W = T * J * T^{-1}. J carries exact block structure: real Jordan blocks
// lambda*I + S, and 2x2 rotation-scaling blocks [[a,-b],[b,a]] (with identity
// superdiagonal couplings) for complex-conjugate eigenpairs.
struct JordanDecomposition {
  Eigen::MatrixXd transform;
  Eigen::MatrixXd jordan;
  std::vector<JordanBlock> blocks;
};

namespace jnf_detail {

using Cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

// Rotate a complex vector's phase so its largest-magnitude entry is real and
// positive; makes SVD/eigensolver output deterministic and keeps vectors of
// real subproblems real.
inline VecC phase_fix(const VecC& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const Cplx pivot = v(imax);
  if (std::abs(pivot) < 1e-300) return v;
  return v * (std::conj(pivot) / std::abs(pivot));
}

// Orthonormal basis of the right singular directions with sigma < eps.
inline MatC eps_kernel(const MatC& x, double eps, int max_dim) {
  Eigen::JacobiSVD<MatC> svd(x, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int dim = 0;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0 && s(i) < eps; --i) ++dim;
  dim = std::min(dim, max_dim);
  MatC out(x.cols(), dim);
  for (int k = 0; k < dim; ++k)
    out.col(k) = phase_fix(svd.matrixV().col(x.cols() - 1 - k));
  return out;
}

inline MatC orthonormalize(const MatC& cols, double tol = 1e-10) {
  if (cols.cols() == 0) return cols;
  Eigen::JacobiSVD<MatC> svd(cols, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++rank;
  MatC out(cols.rows(), rank);
  for (int k = 0; k < rank; ++k) out.col(k) = phase_fix(svd.matrixU().col(k));
  return out;
}

struct Chain {
  std::vector<VecC> vecs;  // vecs[0] is the eigenvector, vecs.back() the top
  Cplx lambda;
};

struct PendingBlock {
  int depth;
  Cplx lambda;       // representative (Im >= 0)
  bool is_pair;      // realified conjugate pair
  std::vector<VecC> vecs;
};

}  // namespace jnf_detail

inline JordanDecomposition jordan_normal_form(const Eigen::MatrixXd& w,
                                              double eps = 0.7) {
  using namespace jnf_detail;
  const int n = static_cast<int>(w.rows());
  if (w.cols() != n) throw JordanError("jordan_normal_form: matrix not square");
  JordanDecomposition out;
  if (n == 0) return out;

  Eigen::EigenSolver<Eigen::MatrixXd> es(w);
  if (es.info() != Eigen::Success)
    throw JordanError("jordan_normal_form: eigensolver failed");
  const VecC eigs = es.eigenvalues();
  const MatC eigvecs = es.eigenvectors();

  // Step 1: group eigenvalues. An eps-sized perturbation of a defective block
  // splits a double eigenvalue by +-sqrt(eps), so the pairing radius is
  // 2*sqrt(eps); grouped components must be cliques under that radius.
  const double radius = 2.0 * std::sqrt(eps);
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a)
      a = parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(eigs(i) - eigs(j)) <= radius) parent[static_cast<std::size_t>(find(i))] = find(j);

  std::vector<std::vector<int>> groups;
  {
    std::vector<int> root_to_group(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
      const int r = find(i);
      if (root_to_group[static_cast<std::size_t>(r)] < 0) {
        root_to_group[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
        groups.emplace_back();
      }
      groups[static_cast<std::size_t>(root_to_group[static_cast<std::size_t>(r)])].push_back(i);
    }
  }
  for (const auto& g : groups)
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b)
        if (std::abs(eigs(g[a]) - eigs(g[b])) > radius)
          throw GroupingError(
              "jordan_normal_form: eigenvalue closeness is not transitive at "
              "this threshold");

  std::vector<Cplx> means(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    Cplx s = 0;
    for (int i : groups[gi]) s += eigs(i);
    means[gi] = s / static_cast<double>(groups[gi].size());
  }

  // Pair complex groups with their conjugates; keep Im >= 0 representatives.
  std::vector<bool> skip(groups.size(), false);
  std::vector<bool> is_real_group(groups.size(), false);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double imag_tol = 1e-8 * (1.0 + std::abs(means[gi]));
    if (std::abs(means[gi].imag()) <= imag_tol) {
      is_real_group[gi] = true;
      means[gi] = Cplx(means[gi].real(), 0.0);
      continue;
    }
    if (means[gi].imag() < 0) {
      bool found = false;
      for (std::size_t gj = 0; gj < groups.size(); ++gj)
        if (gj != gi && std::abs(means[gj] - std::conj(means[gi])) <= imag_tol * 10)
          found = true;
      if (!found)
        throw JordanError("jordan_normal_form: missing conjugate partner group");
      skip[gi] = true;  // handled via the Im > 0 partner
    }
  }

  const MatC wc = w.cast<Cplx>();
  std::vector<PendingBlock> pending;

  auto push_split_back = [&](const std::vector<int>& members, bool pair_group) {
    // Non-defective resolution: one block per eigenvalue (conjugate pairs
    // realified), using the eigensolver's own vectors and the *original*
    // eigenvalues rather than the group mean.
    std::vector<int> order = members;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const Cplx la = eigs(a), lb = eigs(b);
      if (la.real() != lb.real()) return la.real() < lb.real();
      return la.imag() < lb.imag();
    });
    if (pair_group) {
      // every member has Im > 0; its conjugate lives in the partner group
      for (int idx : order) {
        PendingBlock b{1, eigs(idx), true, {phase_fix(eigvecs.col(idx))}};
        pending.push_back(std::move(b));
      }
      return;
    }
    std::vector<bool> used(order.size(), false);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (used[i]) continue;
      const int idx = order[i];
      const Cplx lam = eigs(idx);
      if (std::abs(lam.imag()) <= 1e-12 * (1.0 + std::abs(lam))) {
        PendingBlock b{1, Cplx(lam.real(), 0.0), false, {phase_fix(eigvecs.col(idx))}};
        pending.push_back(std::move(b));
        used[i] = true;
      } else {
        // a conjugate pair merged inside a real-mean group
        std::size_t mate = order.size();
        for (std::size_t j = i + 1; j < order.size(); ++j)
          if (!used[j] &&
              std::abs(eigs(order[j]) - std::conj(lam)) <= 1e-8 * (1.0 + std::abs(lam))) {
            mate = j;
            break;
          }
        if (mate == order.size())
          throw JordanError("jordan_normal_form: unpaired complex eigenvalue");
        const int rep_idx = lam.imag() > 0 ? idx : order[mate];
        PendingBlock b{1, eigs(rep_idx), true, {phase_fix(eigvecs.col(rep_idx))}};
        pending.push_back(std::move(b));
        used[i] = used[mate] = true;
      }
    }
  };

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    if (skip[gi]) continue;
    const auto& members = groups[gi];
    const int mult = static_cast<int>(members.size());
    const Cplx lam = means[gi];
    const bool pair_group = !is_real_group[gi];

    if (mult == 1 && !pair_group) {
      push_split_back(members, pair_group);
      continue;
    }

    // Steps 2-3: iterated eps-kernels give the generalized eigenvector depth
    // spaces U_1 subset U_2 subset ...
    const MatC m = wc - lam * MatC::Identity(n, n);
    std::vector<MatC> depth_spaces;
    std::vector<int> dims;
    while (true) {
      MatC x = m;
      if (!depth_spaces.empty()) {
        const MatC& u = depth_spaces.back();
        x = (MatC::Identity(n, n) - u * u.adjoint()) * m;
      }
      MatC ker = eps_kernel(x, eps, mult);
      const int d = static_cast<int>(ker.cols());
      if (!dims.empty() && d <= dims.back()) break;  // plateau
      const int inc = d - (dims.empty() ? 0 : dims.back());
      const int prev_inc = dims.size() < 2
                               ? (dims.empty() ? inc : dims[0])
                               : dims[dims.size() - 1] - dims[dims.size() - 2];
      if (inc > prev_inc)
        throw KernelConsistencyError(
            "jordan_normal_form: kernel dimensions increase inconsistently");
      depth_spaces.push_back(std::move(ker));
      dims.push_back(d);
      if (d >= mult) break;
    }

    const int d1 = dims.empty() ? 0 : dims[0];
    if (d1 == 0 || d1 >= mult) {
      // Merging revealed no chain structure; diagonalizable resolution.
      push_split_back(members, pair_group);
      continue;
    }
    if (dims.back() < mult)
      throw KernelConsistencyError(
          "jordan_normal_form: depth spaces do not reach the group "
          "multiplicity");

    // Step 4: build chains from the deepest level down.
    const int max_depth = static_cast<int>(dims.size());
    auto blocks_ge = [&](int k) {  // chains with length >= k
      return dims[static_cast<std::size_t>(k - 1)] -
             (k >= 2 ? dims[static_cast<std::size_t>(k - 2)] : 0);
    };
    std::vector<std::vector<VecC>> occupied(static_cast<std::size_t>(max_depth) + 1);
    std::vector<Chain> chains;
    for (int length = max_depth; length >= 1; --length) {
      const int want = blocks_ge(length) -
                       (length + 1 <= max_depth ? blocks_ge(length + 1) : 0);
      if (want <= 0) continue;
      // candidate tops: directions of U_length not already explained by
      // U_{length-1} or by deeper chains passing through this level
      MatC excl(n, 0);
      if (length >= 2) excl = depth_spaces[static_cast<std::size_t>(length - 2)];
      for (const auto& v : occupied[static_cast<std::size_t>(length)]) {
        excl.conservativeResize(n, excl.cols() + 1);
        excl.col(excl.cols() - 1) = v;
      }
      const MatC q = orthonormalize(excl);
      MatC z = depth_spaces[static_cast<std::size_t>(length - 1)];
      if (q.cols() > 0) z = z - q * (q.adjoint() * z);
      Eigen::JacobiSVD<MatC> svd(z, Eigen::ComputeThinU);
      for (int c = 0; c < want; ++c) {
        if (svd.singularValues()(c) < 1e-10)
          throw KernelConsistencyError(
              "jordan_normal_form: could not isolate a chain top");
        Chain chain;
        chain.lambda = lam;
        std::vector<VecC> down;
        VecC v = phase_fix(svd.matrixU().col(c));
        down.push_back(v);
        for (int depth = length - 1; depth >= 1; --depth) {
          const MatC& u = depth_spaces[static_cast<std::size_t>(depth - 1)];
          VecC next = u * (u.adjoint() * (m * down.back()));
          if (next.norm() < 1e-12)
            throw KernelConsistencyError(
                "jordan_normal_form: chain collapsed while descending");
          down.push_back(next);
        }
        for (int depth = 1; depth <= length; ++depth) {
          chain.vecs.push_back(down[static_cast<std::size_t>(length - depth)]);
          occupied[static_cast<std::size_t>(depth)].push_back(
              down[static_cast<std::size_t>(length - depth)]);
        }
        PendingBlock b{length, lam, pair_group, chain.vecs};
        pending.push_back(std::move(b));
      }
    }
  }

  // Deterministic block order: larger blocks first, then by |lambda|, then by
  // eigenvalue angle.
  std::vector<std::size_t> order(pending.size());
  std::iota(order.begin(), order.end(), 0);
  auto block_rows = [&](const PendingBlock& b) {
    return b.is_pair ? 2 * b.depth : b.depth;
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &pa = pending[a], &pb = pending[b];
    if (block_rows(pa) != block_rows(pb)) return block_rows(pa) > block_rows(pb);
    const double ma = std::abs(pa.lambda), mb = std::abs(pb.lambda);
    if (std::abs(ma - mb) > 1e-12) return ma > mb;
    return std::arg(pa.lambda) < std::arg(pb.lambda);
  });

  int total = 0;
  for (const auto& b : pending) total += block_rows(b);
  if (total != n)
    throw KernelConsistencyError(
        "jordan_normal_form: blocks cover " + std::to_string(total) +
        " of " + std::to_string(n) + " dimensions");

  out.transform.resize(n, n);
  out.jordan = Eigen::MatrixXd::Zero(n, n);
  int col = 0;
  for (const std::size_t oi : order) {
    const auto& b = pending[oi];
    JordanBlock jb;
    jb.start = col;
    jb.depth = b.depth;
    jb.lambda = b.lambda;
    jb.kind = b.is_pair ? BlockKind::kRotation : BlockKind::kReal;
    jb.rows = block_rows(b);
    if (!b.is_pair) {
      for (int j = 0; j < b.depth; ++j) {
        const VecC& v = b.vecs[static_cast<std::size_t>(j)];
        if (v.imag().norm() > 1e-6 * (1.0 + v.real().norm()))
          throw JordanError("jordan_normal_form: real chain has complex parts");
        out.transform.col(col + j) = v.real();
        out.jordan(col + j, col + j) = b.lambda.real();
        if (j + 1 < b.depth) out.jordan(col + j, col + j + 1) = 1.0;
      }
    } else {
      const double a = b.lambda.real(), im = b.lambda.imag();
      for (int j = 0; j < b.depth; ++j) {
        const VecC& v = b.vecs[static_cast<std::size_t>(j)];
        out.transform.col(col + 2 * j) = v.real();
        out.transform.col(col + 2 * j + 1) = -v.imag();
        out.jordan(col + 2 * j, col + 2 * j) = a;
        out.jordan(col + 2 * j, col + 2 * j + 1) = -im;
        out.jordan(col + 2 * j + 1, col + 2 * j) = im;
        out.jordan(col + 2 * j + 1, col + 2 * j + 1) = a;
        if (j + 1 < b.depth) {
          out.jordan(col + 2 * j, col + 2 * j + 2) = 1.0;
          out.jordan(col + 2 * j + 1, col + 2 * j + 3) = 1.0;
        }
      }
    }
    col += jb.rows;
    out.blocks.push_back(jb);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(out.transform);
  if (!lu.isInvertible())
    throw JordanError("jordan_normal_form: transform is singular");
  return out;
}

}  // namespace rnnsynth
