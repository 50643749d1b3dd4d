#pragma once

#include "labelforge/label_matrix.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace labelforge {

/// Index of a (vote_j, vote_k) cell in an edge table: 3 * (vote_j + 1) + (vote_k + 1).
constexpr std::size_t joint_cell(Vote vj, Vote vk) {
  return 3 * static_cast<std::size_t>(vj + 1) + static_cast<std::size_t>(vk + 1);
}

/// Class slot of a label: 0 for y = -1, 1 for y = +1.
constexpr std::size_t class_slot(int y) { return y > 0 ? 1 : 0; }

struct LFParams {
  double propensity = 0.5;  ///< q = P(vote != 0)
  double accuracy = 0.7;    ///< a = P(vote == y | vote != 0)
};

/// Joint vote table of a correlated LF pair, one 9-cell slice per class.
struct EdgeParams {
  std::size_t j = 0;
  std::size_t k = 0;
  std::array<std::array<double, 9>, 2> joint{};
};

/// Class balance, per-LF conditionals and correlated-pair tables.
///
/// For an LF that belongs to an edge, `lfs[j]` is derived from the edge
/// table (class-weighted marginal propensity and accuracy) and is not a
/// free parameter.
struct GenerativeParams {
  double beta = 0.5;  ///< P(y = +1)
  std::vector<LFParams> lfs;
  std::vector<EdgeParams> edges;
};

struct PairScore {
  std::size_t j = 0;
  std::size_t k = 0;
  double score = 0.0;
};

struct DependencyStructure {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< (j, k) with j < k
  std::vector<PairScore> scores;                           ///< every candidate pair, score descending

  /// Throws unless the edges form a matching over LFs [0, m).
  void validate(std::size_t m) const;
};

struct FitConfig {
  std::uint64_t seed = 0;
  int max_iter = 500;
  double tol = 1e-7;
  double step = 0.1;
  /// Step multiplier applied after an accepted iteration; 1 keeps it fixed.
  double step_growth = 1.5;
  /// Initial class balance, e.g. the dev-set positive rate.
  std::optional<double> init_beta;
  /// Pins the class balance instead of learning it.
  std::optional<double> fixed_beta;
  /// Pins singleton propensities instead of learning them.
  std::optional<std::vector<double>> fixed_propensity;

  void validate() const;
};

struct FitResult {
  GenerativeParams params;
  int iterations = 0;
  double objective = 0.0;  ///< mean negative log marginal likelihood
  bool converged = false;
  bool flipped = false;  ///< the label-flip convention was applied
  std::vector<double> trace;  ///< objective after every accepted iteration
};

/// Sum over rows of log P(votes_i), marginalizing y exactly.
double log_marginal_likelihood(const LabelMatrix& matrix, const GenerativeParams& params,
                               const DependencyStructure& structure);

/// log P(votes | y) for one dense vote row.
double log_likelihood_given_class(const GenerativeParams& params, std::span<const Vote> row, int y);

/// Exact P(y = +1 | row).
double predict_proba(const GenerativeParams& params, const DependencyStructure& structure,
                     std::span<const Vote> row);

/// Fits parameters by maximizing the marginal likelihood of the matrix.
FitResult fit(const LabelMatrix& matrix, const DependencyStructure& structure, const FitConfig& config = {});

/// Greedy matching of LF pairs whose residual dependence under the
/// independent fit exceeds `threshold`.
DependencyStructure learn_structure(const LabelMatrix& matrix, double threshold = 0.05,
                                    const FitConfig& config = {});

/// Posterior label per row; rows listed in `dev_ids` are flagged excluded.
ProbLabels emit_labels(const GenerativeParams& params, const DependencyStructure& structure,
                       const LabelMatrix& matrix, const std::vector<std::string>& dev_ids);

/// Global label flip: beta -> 1 - beta, a -> 1 - a, edge class slices swapped.
GenerativeParams flip_labels(const GenerativeParams& params);

/// Mean accuracy over every LF.
double mean_accuracy(const GenerativeParams& params);

/// Unconstrained logit-space coordinates of the parameters.
///
/// Layout: beta logit, then (propensity logit, accuracy logit) per LF not
/// in an edge, then 18 softmax logits per edge (9 per class slice).
class ParameterMap {
 public:
  ParameterMap(std::size_t m, const DependencyStructure& structure);

  std::size_t size() const noexcept { return size_; }
  std::size_t m() const noexcept { return m_; }
  std::vector<double> to_logits(const GenerativeParams& params) const;
  GenerativeParams from_logits(std::span<const double> logits) const;

  std::size_t beta_index() const noexcept { return 0; }
  /// Propensity logit of singleton LF j, or npos for edge members.
  std::size_t propensity_index(std::size_t j) const { return singleton_offset_[j]; }
  std::size_t accuracy_index(std::size_t j) const {
    return singleton_offset_[j] == npos ? npos : singleton_offset_[j] + 1;
  }
  std::size_t edge_offset(std::size_t e) const { return edge_offset_[e]; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  /// Edge index containing LF j, or npos.
  std::size_t edge_of(std::size_t j) const { return edge_of_[j]; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t m_;
  std::size_t size_ = 1;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::size_t> singleton_offset_;
  std::vector<std::size_t> edge_offset_;
  std::vector<std::size_t> edge_of_;
};

/// Distinct vote rows with their multiplicities, in lexicographic order.
struct VotePatterns {
  std::size_t m = 0;
  std::size_t n = 0;
  std::vector<Vote> votes;  ///< patterns.size() * m, row-major
  std::vector<double> counts;

  static VotePatterns from_matrix(const LabelMatrix& matrix);
  std::size_t size() const noexcept { return counts.size(); }
  std::span<const Vote> pattern(std::size_t p) const { return {votes.data() + p * m, m}; }
};

/// Mean negative log marginal likelihood at `logits`; fills `gradient`
/// (same length as `logits`) when non-null.
double objective(const VotePatterns& patterns, const ParameterMap& map, std::span<const double> logits,
                 std::vector<double>* gradient);

struct ModelFile {
  GenerativeParams params;
  DependencyStructure structure;
  std::vector<std::string> lf_names;
  std::string lfset_version;
  nlohmann::json fit_metadata;
};

nlohmann::json model_to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& doc);

}  // namespace labelforge
