#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnsynth/cluster.hpp"
#include "rnnsynth/lattice.hpp"

namespace rnnsynth {

// Discrete codec for hidden states: either a Boolean codebook (clusters
// labeled with bitstrings) or an integer lattice.
struct Codec {
  enum class Kind { kBits, kLattice };
  Kind kind = Kind::kBits;
  BitCodebook bits;
  LatticeModel lattice;

  int width() const {
    return kind == Kind::kBits ? bits.bits : lattice.dim;
  }
  bool is_bit_code() const { return kind == Kind::kBits; }

  std::vector<long long> encode(const Eigen::VectorXd& h) const {
    return kind == Kind::kBits ? bits.encode(h) : lattice.encode(h);
  }
};

inline void save_codec(const Codec& c, const std::string& path) {
  nlohmann::json j;
  if (c.kind == Codec::Kind::kBits) {
    j["kind"] = "bits";
    j["bits"] = c.bits.bits;
    j["assignment"] = c.bits.assignment;
    j["heuristic"] = c.bits.heuristic;
    std::vector<std::vector<double>> centers;
    for (int col = 0; col < c.bits.centers.cols(); ++col) {
      std::vector<double> v(c.bits.centers.rows());
      for (int i = 0; i < c.bits.centers.rows(); ++i)
        v[static_cast<std::size_t>(i)] = c.bits.centers(i, col);
      centers.push_back(std::move(v));
    }
    j["centers"] = centers;
  } else {
    j["kind"] = "lattice";
    j["dim"] = c.lattice.dim;
    std::vector<std::vector<double>> basis;
    for (int col = 0; col < c.lattice.basis.cols(); ++col) {
      std::vector<double> v(c.lattice.basis.rows());
      for (int i = 0; i < c.lattice.basis.rows(); ++i)
        v[static_cast<std::size_t>(i)] = c.lattice.basis(i, col);
      basis.push_back(std::move(v));
    }
    j["basis"] = basis;
    j["offset"] = std::vector<double>(
        c.lattice.offset.data(), c.lattice.offset.data() + c.lattice.offset.size());
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_codec: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline Codec load_codec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_codec: cannot open " + path);
  nlohmann::json j;
  in >> j;
  Codec c;
  if (j.at("kind") == "bits") {
    c.kind = Codec::Kind::kBits;
    c.bits.bits = j.at("bits").get<int>();
    c.bits.assignment = j.at("assignment").get<std::vector<unsigned>>();
    c.bits.heuristic = j.at("heuristic").get<bool>();
    const auto centers = j.at("centers").get<std::vector<std::vector<double>>>();
    c.bits.centers.resize(static_cast<Eigen::Index>(centers[0].size()),
                          static_cast<Eigen::Index>(centers.size()));
    for (std::size_t col = 0; col < centers.size(); ++col)
      for (std::size_t i = 0; i < centers[col].size(); ++i)
        c.bits.centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
            centers[col][i];
  } else {
    c.kind = Codec::Kind::kLattice;
    const auto basis = j.at("basis").get<std::vector<std::vector<double>>>();
    c.lattice.basis.resize(static_cast<Eigen::Index>(basis[0].size()),
                           static_cast<Eigen::Index>(basis.size()));
    for (std::size_t col = 0; col < basis.size(); ++col)
      for (std::size_t i = 0; i < basis[col].size(); ++i)
        c.lattice.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
            basis[col][i];
    const auto off = j.at("offset").get<std::vector<double>>();
    c.lattice.offset =
        Eigen::Map<const Eigen::VectorXd>(off.data(), static_cast<Eigen::Index>(off.size()));
    c.lattice.finalize();
  }
  return c;
}

}  // namespace rnnsynth
