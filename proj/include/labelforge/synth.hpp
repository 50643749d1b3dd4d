#pragma once

#include "labelforge/corpus.hpp"
#include "labelforge/end_model.hpp"
#include "labelforge/label_matrix.hpp"
#include "labelforge/label_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace labelforge {

/// LF `target` copies LF `source` with probability `copy_prob`.
struct PlantedEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  double copy_prob = 1.0;
};

struct SynthSpec {
  std::size_t m = 5;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double beta = 0.5;
  double a_lo = 0.6;
  double a_hi = 0.9;
  double q_lo = 0.3;
  double q_hi = 0.8;
  std::vector<PlantedEdge> edges;
  /// Explicit per-LF values override the ranges (any value in [0, 1]).
  std::optional<std::vector<double>> accuracies;
  std::optional<std::vector<double>> propensities;
  /// Seed for the row stream; derived from `seed` when unset, so the same
  /// `seed` with different `n` keeps the true parameters.
  std::optional<std::uint64_t> data_seed;

  void validate() const;
};

struct SynthDataset {
  LabelMatrix matrix;
  std::vector<int> y_true;
  GenerativeParams truth;
  DependencyStructure structure;
};

/// Draws true parameters, then labels and LF votes.
SynthDataset sample_dataset(const SynthSpec& spec);

struct TextCorpusOptions {
  double positive_rate = 0.5;
  std::size_t dev_size = 200;
  /// Fraction of negatives carrying a negated abnormality mention.
  double negated_fraction = 0.10;
  /// Fraction of negatives with a stray un-negated mention.
  double false_mention_rate = 0.03;
  /// Fraction of positives whose report omits every lexicon term.
  double silent_positive_rate = 0.08;
};

struct TextCorpus {
  Corpus corpus;  ///< already segmented with `headers`
  std::vector<DevLabel> dev;
  std::vector<int> y_true;
  std::vector<std::string> headers;
};

/// Section headers used by the generated reports.
const std::vector<std::string>& synthetic_report_headers();
/// Planted abnormality lexicon, one phrase per entry.
const std::vector<std::string>& abnormality_lexicon();

/// Templated ASCII pseudo-reports with FINDINGS / IMPRESSION sections.
TextCorpus gen_text_corpus(std::size_t n, std::uint64_t seed, const TextCorpusOptions& options = {});

/// Class-conditional Gaussian features: mean +mu per coordinate for y = +1,
/// -mu for y = -1, isotropic noise `sigma`.
FeatureMatrix gen_features(const std::vector<std::string>& ids, const std::vector<int>& y_true, std::size_t d,
                           double sigma, std::uint64_t seed, double mu = 0.3);

/// ROC-AUC of the Bayes-optimal linear score for `gen_features` data.
double gaussian_bayes_auc(std::size_t d, double sigma, double mu = 0.3);

}  // namespace labelforge
