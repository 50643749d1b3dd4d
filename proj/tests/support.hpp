#pragma once

#include "labelforge/label_model.hpp"
#include "labelforge/util.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

namespace lftest {

namespace lf = labelforge;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("labelforge_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Reference model written straight from the generative definition, sharing
// no code with the library.

inline double singleton_prob(const lf::LFParams& lfp, int vote, int y) {
  if (vote == 0) return 1.0 - lfp.propensity;
  return vote == y ? lfp.propensity * lfp.accuracy : lfp.propensity * (1.0 - lfp.accuracy);
}

inline double edge_prob(const lf::EdgeParams& e, int vj, int vk, int y) {
  return e.joint[y > 0 ? 1 : 0][3 * (vj + 1) + (vk + 1)];
}

/// P(votes | y) by direct product over singletons and edge tables.
inline double class_likelihood(const lf::GenerativeParams& p, const std::vector<int>& votes, int y) {
  std::vector<bool> in_edge(p.lfs.size(), false);
  double prob = 1.0;
  for (const auto& e : p.edges) {
    in_edge[e.j] = in_edge[e.k] = true;
    prob *= edge_prob(e, votes[e.j], votes[e.k], y);
  }
  for (std::size_t j = 0; j < p.lfs.size(); ++j) {
    if (!in_edge[j]) prob *= singleton_prob(p.lfs[j], votes[j], y);
  }
  return prob;
}

/// log sum_y P(y) P(votes | y), two explicit terms.
inline double brute_force_log_marginal(const lf::GenerativeParams& p, const std::vector<int>& votes) {
  const double pos = p.beta * class_likelihood(p, votes, 1);
  const double neg = (1.0 - p.beta) * class_likelihood(p, votes, -1);
  return std::log(pos + neg);
}

inline double brute_force_posterior(const lf::GenerativeParams& p, const std::vector<int>& votes) {
  const double pos = p.beta * class_likelihood(p, votes, 1);
  const double neg = (1.0 - p.beta) * class_likelihood(p, votes, -1);
  return pos / (pos + neg);
}

/// Random parameters; `edges` must already be a matching with j < k.
inline lf::GenerativeParams random_params(lf::Rng& rng, std::size_t m,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& edges = {}) {
  lf::GenerativeParams p;
  p.beta = rng.uniform(0.1, 0.9);
  for (std::size_t j = 0; j < m; ++j) p.lfs.push_back({rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)});
  for (const auto& [j, k] : edges) {
    lf::EdgeParams e;
    e.j = j;
    e.k = k;
    for (auto& slice : e.joint) {
      double total = 0.0;
      for (auto& cell : slice) total += (cell = rng.uniform(0.05, 1.0));
      for (auto& cell : slice) cell /= total;
    }
    p.edges.push_back(e);
  }
  return p;
}

/// Random matching over [0, m) with j < k.
inline std::vector<std::pair<std::size_t, std::size_t>> random_matching(lf::Rng& rng, std::size_t m) {
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = j;
  for (std::size_t j = m; j > 1; --j) std::swap(order[j - 1], order[rng.below(j)]);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t pairs = m >= 2 ? rng.below(m / 2 + 1) : 0;
  for (std::size_t e = 0; e < pairs; ++e) {
    const auto a = order[2 * e], b = order[2 * e + 1];
    out.emplace_back(std::min(a, b), std::max(a, b));
  }
  return out;
}

inline lf::DependencyStructure structure_of(const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  lf::DependencyStructure s;
  s.edges = edges;
  return s;
}

/// Uniformly random votes in {-1, 0, +1}.
inline lf::LabelMatrix random_matrix(lf::Rng& rng, std::size_t n, std::size_t m) {
  std::vector<lf::Vote> dense(n * m);
  for (auto& v : dense) v = static_cast<lf::Vote>(static_cast<int>(rng.below(3)) - 1);
  std::vector<std::string> rows, cols;
  for (std::size_t i = 0; i < n; ++i) rows.push_back("r" + std::to_string(i));
  for (std::size_t j = 0; j < m; ++j) cols.push_back("lf" + std::to_string(j));
  return lf::LabelMatrix::from_dense(rows, cols, dense);
}

/// Decodes `code` in base 3 into m votes.
inline std::vector<int> vote_vector(std::size_t code, std::size_t m) {
  std::vector<int> v(m);
  for (std::size_t j = 0; j < m; ++j) {
    v[j] = static_cast<int>(code % 3) - 1;
    code /= 3;
  }
  return v;
}

inline lf::LabelMatrix single_row(const std::vector<int>& votes) {
  std::vector<lf::Vote> dense(votes.begin(), votes.end());
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < votes.size(); ++j) cols.push_back("lf" + std::to_string(j));
  return lf::LabelMatrix::from_dense({"r0"}, cols, dense);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

}  // namespace lftest
