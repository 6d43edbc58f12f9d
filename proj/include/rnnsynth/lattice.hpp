#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rnnsynth/rnn.hpp"

namespace rnnsynth {

class LatticeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NonLatticeError : public LatticeError {
 public:
  using LatticeError::LatticeError;
};

// Affine image of an integer lattice: point ~ basis * k + offset.
struct LatticeModel {
  Eigen::MatrixXd basis;   // n x D
  Eigen::VectorXd offset;  // n
  int dim = 0;
  Eigen::MatrixXd pinv;    // D x n, least-squares solve for codes

  void finalize() {
    dim = static_cast<int>(basis.cols());
    pinv = (basis.transpose() * basis).ldlt().solve(basis.transpose());
  }

  std::vector<long long> encode(const Eigen::VectorXd& p) const {
    const Eigen::VectorXd k = pinv * (p - offset);
    std::vector<long long> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
      out[static_cast<std::size_t>(i)] = std::llround(k(i));
    return out;
  }

  Eigen::VectorXd decode(const std::vector<long long>& k) const {
    Eigen::VectorXd kv(dim);
    for (int i = 0; i < dim; ++i)
      kv(i) = static_cast<double>(k[static_cast<std::size_t>(i)]);
    return basis * kv + offset;
  }

  double residual(const Eigen::VectorXd& p) const {
    return (decode(encode(p)) - p).norm();
  }
};

// Description-length score of a fitted lattice over a point set.
struct DlScore {
  double eps_gcd = 0.0;
  double p = 100.0;  // data fraction percent used for the fit
  double total_dl = 0.0;
};

inline constexpr double kDlEps = 1e-4;

inline double description_length(const LatticeModel& m,
                                 const Eigen::MatrixXd& points) {
  double dl = 0.0;
  for (int j = 0; j < points.cols(); ++j) {
    const auto k = m.encode(points.col(j));
    double k2 = 0.0;
    for (long long v : k) k2 += static_cast<double>(v) * static_cast<double>(v);
    const double resid = (m.decode(k) - points.col(j)).norm() / kDlEps;
    dl += std::log1p(k2) + std::log1p(resid * resid);
  }
  return dl;
}

// ---- scalar GCD with relaxed termination --------------------------------------

// Euclidean iteration with nearest-integer quotients; remainders below eps
// terminate. All-zero input is an error.
inline double gcd_scalar(const std::vector<double>& values, double eps) {
  double g = 0.0;
  bool any = false;
  for (double v : values) {
    if (std::abs(v) <= eps) continue;
    any = true;
    double a = g, b = v;
    while (std::abs(b) > eps) {
      const double q = std::round(a / b);
      const double r = a - q * b;
      a = b;
      b = r;
    }
    g = std::abs(a);
  }
  if (!any) throw LatticeError("gcd_scalar: all values are zero");
  return g;
}

// ---- basis simplification -------------------------------------------------------

namespace lattice_detail {

inline long long int_det(std::vector<std::vector<long long>> m) {
  // Bareiss; sizes here are tiny
  const int n = static_cast<int>(m.size());
  long long prev = 1, sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] == 0) {
      int swap_row = -1;
      for (int i = k + 1; i < n; ++i)
        if (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] != 0) {
          swap_row = i;
          break;
        }
      if (swap_row < 0) return 0;
      std::swap(m[static_cast<std::size_t>(k)], m[static_cast<std::size_t>(swap_row)]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j) {
        m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                 m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] -
             m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                 m[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]) /
            prev;
      }
    prev = m[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
  }
  return sign * m[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(n - 1)];
}

}  // namespace lattice_detail

// Iterated integer project-and-subtract until no column norm can shrink; the
// accumulated transform is exactly unimodular (checked in integers), so |det|
// is preserved.
inline Eigen::MatrixXd basis_simplify(const Eigen::MatrixXd& basis) {
  Eigen::MatrixXd b = basis;
  const int d = static_cast<int>(b.cols());
  std::vector<std::vector<long long>> u(
      static_cast<std::size_t>(d), std::vector<long long>(static_cast<std::size_t>(d), 0));
  for (int i = 0; i < d; ++i) u[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;

  bool changed = true;
  int passes = 0;
  while (changed && passes++ < 200) {
    changed = false;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        const double denom = b.col(j).squaredNorm();
        if (denom <= 0) continue;
        const auto q = static_cast<long long>(
            std::llround(b.col(i).dot(b.col(j)) / denom));
        if (q == 0) continue;
        const Eigen::VectorXd cand = b.col(i) - static_cast<double>(q) * b.col(j);
        if (cand.squaredNorm() < b.col(i).squaredNorm() * (1.0 - 1e-12)) {
          b.col(i) = cand;
          for (int r = 0; r < d; ++r)
            u[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] -=
                q * u[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
          changed = true;
        }
      }
  }
  const long long det = lattice_detail::int_det(u);
  if (det != 1 && det != -1)
    throw LatticeError("basis_simplify: transform is not unimodular");
  return b;
}

// ---- GCD lattice finder ----------------------------------------------------------

struct LatticeFindConfig {
  int max_refines = 500;
  double dim_noise_floor = 0.0;  // extra per-direction rms below which a
                                 // singular direction is treated as noise
};

// Least-squares re-estimation of (basis, offset) from the current integer
// codes, alternated a few rounds. The generalized GCD discovers the lattice
// structure; this polishes its parameters against every point so that code
// noise does not amplify far from the fitting region.
inline void polish_lattice(LatticeModel& m, const Eigen::MatrixXd& points,
                           int rounds = 3) {
  const auto n = points.rows();
  const auto count = points.cols();
  const int d = m.dim;
  if (count < d + 1) return;
  for (int round = 0; round < rounds; ++round) {
    Eigen::MatrixXd z(d + 1, count);
    for (Eigen::Index j = 0; j < count; ++j) {
      const auto k = m.encode(points.col(j));
      for (int i = 0; i < d; ++i)
        z(i, j) = static_cast<double>(k[static_cast<std::size_t>(i)]);
      z(d, j) = 1.0;
    }
    const Eigen::MatrixXd zzt = z * z.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(zzt);
    if (!lu.isInvertible()) return;
    const Eigen::MatrixXd sol = lu.solve(z * points.transpose());
    Eigen::MatrixXd basis = sol.topRows(d).transpose();
    if (std::sqrt(std::abs((basis.transpose() * basis).determinant())) < 1e-12)
      return;  // collapsed; keep the previous estimate
    m.basis = std::move(basis);
    m.offset = sol.row(d).transpose();
    m.finalize();
  }
  // keep the offset in the fundamental cell (codes shift by an integer)
  const Eigen::VectorXd m0 = m.pinv * m.offset;
  Eigen::VectorXd shift(d);
  for (int i = 0; i < d; ++i) shift(i) = std::round(m0(i));
  m.offset -= m.basis * shift;
  m.finalize();
  (void)n;
}

// Recover basis, offset and integer codes from points sampled off an affine
// lattice. eps_gcd is both the relaxed-GCD remainder threshold and the
// per-point residual tolerance.
inline LatticeModel gcd_lattice_find(const Eigen::MatrixXd& points,
                                     double eps_gcd,
                                     const LatticeFindConfig& cfg = {}) {
  const int n = static_cast<int>(points.rows());
  const int count = static_cast<int>(points.cols());
  if (count < 2) throw LatticeError("gcd_lattice_find: need at least 2 points");

  // reference point: nearest to the centroid, ties broken lexicographically
  const Eigen::VectorXd centroid = points.rowwise().mean();
  int ref = 0;
  for (int j = 1; j < count; ++j) {
    const double dj = (points.col(j) - centroid).norm();
    const double dr = (points.col(ref) - centroid).norm();
    if (dj < dr - 1e-15) ref = j;
    else if (std::abs(dj - dr) <= 1e-15) {
      for (int i = 0; i < n; ++i) {
        if (points(i, j) < points(i, ref) - 1e-15) { ref = j; break; }
        if (points(i, j) > points(i, ref) + 1e-15) break;
      }
    }
  }
  const Eigen::VectorXd c = points.col(ref);

  // deduplicated difference vectors, lexicographic sweep to keep this o(m^2)
  std::vector<Eigen::VectorXd> diffs;
  {
    std::vector<Eigen::VectorXd> all;
    all.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
      Eigen::VectorXd d = points.col(j) - c;
      if (d.norm() > eps_gcd) all.push_back(std::move(d));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      for (int i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
      }
      return false;
    });
    for (auto& d : all) {
      bool dup = false;
      const double tol = 1e-9 * (1.0 + d.norm());
      for (auto it = diffs.rbegin(); it != diffs.rend(); ++it) {
        if (d(0) - (*it)(0) > tol) break;  // sorted window exhausted
        if ((d - *it).norm() <= tol) {
          dup = true;
          break;
        }
      }
      if (!dup) diffs.push_back(std::move(d));
    }
  }
  if (diffs.empty())
    throw LatticeError("gcd_lattice_find: degenerate input (all points equal)");

  // affine dimension from the singular spectrum of the diff matrix
  Eigen::MatrixXd y(n, static_cast<int>(diffs.size()));
  for (std::size_t j = 0; j < diffs.size(); ++j)
    y.col(static_cast<Eigen::Index>(j)) = diffs[j];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(y, Eigen::ComputeFullU);
  const double rms_floor =
      std::max(eps_gcd, cfg.dim_noise_floor) * std::sqrt(static_cast<double>(diffs.size()));
  int dim = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > std::max(rms_floor, 1e-9 * svd.singularValues()(0)))
      ++dim;
  if (dim == 0) throw LatticeError("gcd_lattice_find: degenerate input");
  const Eigen::MatrixXd q = svd.matrixU().leftCols(dim);

  // work in projected coordinates, ascending-norm order
  std::vector<Eigen::VectorXd> cands;
  for (const auto& d : diffs) cands.push_back(q.transpose() * d);
  std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    const double na = a.norm(), nb = b.norm();
    if (std::abs(na - nb) > 1e-15) return na < nb;
    for (int i = 0; i < a.size(); ++i)
      if (std::abs(a(i) - b(i)) > 1e-15) return a(i) < b(i);
    return false;
  });

  std::deque<Eigen::VectorXd> queue(cands.begin(), cands.end());
  Eigen::MatrixXd basis(dim, 0);
  int refines = 0;
  long long processed = 0;
  const long long max_processed =
      static_cast<long long>(cands.size() + 16) * (cfg.max_refines + 2);
  while (!queue.empty()) {
    if (++processed > max_processed)
      throw NonLatticeError("gcd_lattice_find: did not converge");
    const Eigen::VectorXd z = queue.front();
    queue.pop_front();
    if (z.norm() <= eps_gcd) continue;

    if (basis.cols() < dim) {
      bool independent = true;
      if (basis.cols() > 0) {
        const Eigen::VectorXd a =
            (basis.transpose() * basis).ldlt().solve(basis.transpose() * z);
        independent = (z - basis * a).norm() > std::max(eps_gcd, 1e-9 * z.norm());
      }
      if (independent) {
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = z;
        continue;
      }
    }
    // in-span: check integrality, otherwise run the division-with-remainder
    // reduction against the dominant fractional slot
    Eigen::VectorXd a =
        (basis.transpose() * basis).ldlt().solve(basis.transpose() * z);
    Eigen::VectorXd frac = a;
    for (int i = 0; i < frac.size(); ++i) frac(i) = a(i) - std::round(a(i));
    if ((basis * frac).norm() <= eps_gcd) continue;

    if (++refines > cfg.max_refines)
      throw NonLatticeError("gcd_lattice_find: refinement budget exhausted");
    Eigen::VectorXd r = z;
    for (int i = 0; i < a.size(); ++i) r -= std::round(a(i)) * basis.col(i);
    int slot = 0;
    frac.cwiseAbs().maxCoeff(&slot);
    // generalized Euclid: quotients from the slot coordinate, applied to the
    // vectors themselves
    Eigen::VectorXd u_vec = basis.col(slot), v_vec = r;
    double alpha = 1.0, beta = frac(slot);
    const double coord_eps = eps_gcd / std::max(basis.col(slot).norm(), 1e-12);
    int steps = 0;
    while (std::abs(beta) > coord_eps && steps++ < 128) {
      const double qq = std::round(alpha / beta);
      const Eigen::VectorXd nv = u_vec - qq * v_vec;
      const double nb = alpha - qq * beta;
      u_vec = v_vec;
      v_vec = nv;
      alpha = beta;
      beta = nb;
    }
    basis.col(slot) = u_vec;
    if (v_vec.norm() > eps_gcd) queue.push_back(v_vec);
    queue.push_back(z);  // re-examine against the refined basis
  }
  if (basis.cols() != dim)
    throw LatticeError("gcd_lattice_find: failed to span the point set");

  basis = basis_simplify(basis);

  // deterministic column orientation and order
  for (int j = 0; j < basis.cols(); ++j) {
    for (int i = 0; i < basis.rows(); ++i) {
      if (std::abs(basis(i, j)) > 1e-12) {
        if (basis(i, j) < 0) basis.col(j) = -basis.col(j);
        break;
      }
    }
  }
  std::vector<int> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int yj) {
    const double nx = basis.col(x).norm(), ny = basis.col(yj).norm();
    if (std::abs(nx - ny) > 1e-12) return nx < ny;
    for (int i = 0; i < basis.rows(); ++i)
      if (std::abs(basis(i, x) - basis(i, yj)) > 1e-12)
        return basis(i, x) > basis(i, yj);
    return false;
  });
  Eigen::MatrixXd sorted(dim, dim);
  for (int j = 0; j < dim; ++j) sorted.col(j) = basis.col(order[static_cast<std::size_t>(j)]);

  LatticeModel model;
  model.basis = q * sorted;
  model.offset = c;
  model.finalize();
  // canonical offset: reduce the reference point modulo the lattice
  const Eigen::VectorXd m0 = model.pinv * model.offset;
  Eigen::VectorXd shift(dim);
  for (int i = 0; i < dim; ++i) shift(i) = std::round(m0(i));
  model.offset -= model.basis * shift;
  model.finalize();
  polish_lattice(model, points);

  // every input point must code to integers within tolerance
  const double verify_tol = eps_gcd * (1.0 + std::sqrt(static_cast<double>(dim)));
  for (int j = 0; j < count; ++j)
    if (model.residual(points.col(j)) > verify_tol)
      throw NonLatticeError("gcd_lattice_find: residual above tolerance");
  return model;
}

// ---- noise sweep ------------------------------------------------------------------

struct NoiseSweepConfig {
  int eps_steps = 13;        // log-spaced over [1e-3, 1]
  int p_steps = 8;           // log-spaced over [0.1, 100]
  double dl_reject = 12.0;   // mean per-point DL above this is "no lattice"
  int max_fit_points = 2000;
  LatticeFindConfig find;
};

struct NoiseSweepResult {
  bool ok = false;
  LatticeModel model;
  DlScore score;
  std::string reject_reason;
};

inline NoiseSweepResult noise_sweep(const Eigen::MatrixXd& points,
                                    const NoiseSweepConfig& cfg = {}) {
  NoiseSweepResult best;
  best.reject_reason = "no grid setting produced a lattice";
  const int count = static_cast<int>(points.cols());
  if (count < 2) {
    best.reject_reason = "too few points";
    return best;
  }
  const Eigen::VectorXd centroid = points.rowwise().mean();
  std::vector<int> by_dist(static_cast<std::size_t>(count));
  std::iota(by_dist.begin(), by_dist.end(), 0);
  std::stable_sort(by_dist.begin(), by_dist.end(), [&](int a, int b) {
    return (points.col(a) - centroid).squaredNorm() <
           (points.col(b) - centroid).squaredNorm();
  });

  bool found = false;
  for (int ei = 0; ei < cfg.eps_steps; ++ei) {
    const double eps =
        std::pow(10.0, -3.0 + 3.0 * ei / std::max(1, cfg.eps_steps - 1));
    for (int pi = 0; pi < cfg.p_steps; ++pi) {
      const double pct =
          std::pow(10.0, -1.0 + 3.0 * pi / std::max(1, cfg.p_steps - 1));
      int take = static_cast<int>(std::lround(count * pct / 100.0));
      take = std::clamp(take, 2, std::min(count, cfg.max_fit_points));
      Eigen::MatrixXd subset(points.rows(), take);
      for (int j = 0; j < take; ++j)
        subset.col(j) = points.col(by_dist[static_cast<std::size_t>(j)]);
      try {
        LatticeModel m = gcd_lattice_find(subset, eps, cfg.find);
        polish_lattice(m, points);  // fit locally, refine globally
        const double dl = description_length(m, points);
        if (!found || dl < best.score.total_dl) {
          found = true;
          best.model = std::move(m);
          best.score = {eps, pct, dl};
        }
      } catch (const LatticeError&) {
        continue;
      }
    }
  }
  if (!found) return best;
  const double mean_dl = best.score.total_dl / count;
  if (mean_dl > cfg.dl_reject) {
    best.ok = false;
    best.reject_reason = "description length above rejection threshold";
    return best;
  }
  best.ok = true;
  best.reject_reason.clear();
  return best;
}

// ---- linear lattice finder ---------------------------------------------------------

// For affine f the hidden states are integer combinations of the columns of
// W^j V; the largest-norm independent candidates are the lattice basis.
inline LatticeModel linear_lattice_find(const RnnModel& model,
                                        const HiddenTrace& trace) {
  if (model.arch.d_f != 1)
    throw LatticeError("linear_lattice_find: f is not affine");
  const int n = model.arch.n;
  const Eigen::MatrixXd w = model.w_hh();
  const Eigen::MatrixXd v = model.w_in();

  struct Candidate {
    Eigen::VectorXd vec;
    double norm;
    int power, col;
  };
  std::vector<Candidate> cands;
  Eigen::MatrixXd wp = Eigen::MatrixXd::Identity(n, n);
  for (int j = 0; j < trace.seq_len; ++j) {
    const Eigen::MatrixXd m = wp * v;
    for (int c = 0; c < m.cols(); ++c)
      cands.push_back({m.col(c), m.col(c).norm(), j, c});
    wp = w * wp;
  }
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.norm - b.norm) > 1e-12) return a.norm > b.norm;
    if (a.power != b.power) return a.power < b.power;
    return a.col < b.col;
  });

  const double floor_norm = cands.empty() ? 0.0 : 1e-6 * cands[0].norm;
  Eigen::MatrixXd basis(n, 0);
  for (const auto& cand : cands) {
    if (cand.norm <= std::max(floor_norm, 1e-12)) break;
    if (basis.cols() == n) break;
    bool independent = true;
    if (basis.cols() > 0) {
      const Eigen::VectorXd a =
          (basis.transpose() * basis).ldlt().solve(basis.transpose() * cand.vec);
      independent = (cand.vec - basis * a).norm() > 1e-4 * cand.norm;
    }
    if (independent) {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = cand.vec;
    }
  }
  if (basis.cols() == 0)
    throw LatticeError("linear_lattice_find: no nonzero candidate vectors");

  LatticeModel model_out;
  model_out.basis = basis;
  model_out.offset = Eigen::VectorXd::Zero(n);
  model_out.finalize();

  // offset from the trace: start at the point nearest the state centroid,
  // reduce modulo the lattice, then absorb the mean residual
  if (trace.states.cols() > 0) {
    const Eigen::VectorXd ctr = trace.states.rowwise().mean();
    Eigen::Index ref = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < trace.states.cols(); ++j) {
      const double dj = (trace.states.col(j) - ctr).norm();
      if (dj < bestd) {
        bestd = dj;
        ref = j;
      }
    }
    Eigen::VectorXd off = trace.states.col(ref);
    const Eigen::VectorXd m0 = model_out.pinv * off;
    for (int i = 0; i < model_out.dim; ++i)
      off -= std::round(m0(i)) * model_out.basis.col(i);
    model_out.offset = off;
    model_out.finalize();
    Eigen::VectorXd mean_resid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < trace.states.cols(); ++j) {
      const Eigen::VectorXd p = trace.states.col(j);
      mean_resid += p - model_out.decode(model_out.encode(p));
    }
    mean_resid /= static_cast<double>(trace.states.cols());
    model_out.offset += mean_resid;
    model_out.finalize();
  }
  return model_out;
}

}  // namespace rnnsynth
