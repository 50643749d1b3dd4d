#pragma once

#include "labelforge/corpus.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace labelforge {

/// An LF output: -1, +1, or 0 for abstain.
using Vote = std::int8_t;

struct VoteEntry {
  std::uint32_t col = 0;
  Vote vote = 0;

  bool operator==(const VoteEntry&) const = default;
};

/// Sparse n x m matrix of LF votes. Abstains are not stored.
///
/// Rows are kept in CSR form with column indices ascending inside a row.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  /// `rows[i]` lists the non-abstain votes of row i; zero votes are dropped.
  LabelMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_names,
              std::vector<std::vector<VoteEntry>> rows, std::string lfset_version = {});
  /// Row-major dense votes, size n*m.
  static LabelMatrix from_dense(std::vector<std::string> row_ids, std::vector<std::string> col_names,
                                std::span<const Vote> dense, std::string lfset_version = {});

  std::size_t n() const noexcept { return row_ids_.size(); }
  std::size_t m() const noexcept { return col_names_.size(); }
  std::size_t nnz() const noexcept { return entries_.size(); }

  Vote at(std::size_t row, std::size_t col) const;
  std::span<const VoteEntry> row(std::size_t i) const {
    return {entries_.data() + offsets_[i], entries_.data() + offsets_[i + 1]};
  }
  std::vector<Vote> dense_row(std::size_t i) const;
  std::vector<Vote> to_dense() const;

  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::string>& col_names() const noexcept { return col_names_; }
  const std::string& lfset_version() const noexcept { return lfset_version_; }

  /// Column `c` of the result is column `order[c]` of this matrix.
  LabelMatrix permute_columns(std::span<const std::size_t> order) const;
  /// Every vote multiplied by -1.
  LabelMatrix negated() const;

  bool operator==(const LabelMatrix&) const = default;

 private:
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_names_;
  std::vector<std::size_t> offsets_{0};
  std::vector<VoteEntry> entries_;
  std::string lfset_version_;
};

/// Triplet CSV `row_id,lf_name,vote`, rows in matrix order.
std::string matrix_to_csv(const LabelMatrix& matrix);
nlohmann::json matrix_sidecar(const LabelMatrix& matrix);
LabelMatrix matrix_from_csv(std::string_view csv, const nlohmann::json& sidecar);

struct DevAccuracy {
  std::optional<double> value;  ///< null when the LF abstains on every dev doc
  std::size_t count = 0;       ///< dev docs the LF voted on
  std::size_t correct = 0;
};

struct LFStats {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> coverage;
  std::vector<std::vector<int>> polarity;  ///< sorted distinct emitted labels
  std::vector<DevAccuracy> dev_accuracy;
  std::vector<std::vector<double>> overlap;
  std::vector<std::vector<double>> conflict;
};

LFStats compute_stats(const LabelMatrix& matrix, const std::vector<DevLabel>& dev);
nlohmann::json stats_to_json(const LFStats& stats, const LabelMatrix& matrix);

/// Pairwise chi-square independence test on the 3x3 table of vote values.
struct IndependenceTest {
  /// m x m; diagonal is 0, null where either LF is constant.
  std::vector<std::vector<std::optional<double>>> p_values;
  /// Pair had an expected cell count below 5.
  std::vector<std::vector<bool>> low_expected;
};

IndependenceTest pairwise_independence_test(const LabelMatrix& matrix);

struct DependentPair {
  std::size_t j = 0;
  std::size_t k = 0;
  double p_value = 0.0;
  bool low_expected = false;
};

/// Pairs significant at `alpha` after Bonferroni over m(m-1)/2 pairs.
std::vector<DependentPair> dependent_pairs(const IndependenceTest& test, double alpha = 0.01);

struct ProbLabel {
  std::string doc_id;
  double p = 0.0;  ///< P(y = +1 | votes)
  bool excluded = false;

  bool operator==(const ProbLabel&) const = default;
};

struct ProbLabels {
  std::vector<ProbLabel> rows;
  std::string model_version;

  std::vector<std::string> excluded_ids() const;
  std::vector<double> probabilities() const;
};

/// `{"doc_id":...,"p":...,"excluded":...}` per line.
std::string prob_labels_to_jsonl(const ProbLabels& labels);
ProbLabels prob_labels_from_jsonl(std::string_view content);

/// 1 on a strict +1 majority, 0 on a strict -1 majority, `tie_break` otherwise.
ProbLabels majority_vote(const LabelMatrix& matrix, double tie_break = 0.5);

}  // namespace labelforge
