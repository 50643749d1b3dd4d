#pragma once

#include "labelforge/corpus.hpp"
#include "labelforge/diagnostics.hpp"
#include "labelforge/end_model.hpp"
#include "labelforge/label_matrix.hpp"
#include "labelforge/label_model.hpp"
#include "labelforge/lf_dsl.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace labelforge {

namespace fs = std::filesystem;

/// Settings shared by every stage. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
  fs::path base_dir;
  fs::path corpus_path;
  std::string id_field = "id";
  std::string text_field = "text";
  std::vector<std::string> headers;
  fs::path lf_file;
  fs::path dev_labels;
  fs::path features;
  fs::path truth;
  fs::path test_features;
  fs::path test_truth;
  fs::path output_dir = "out";
  FitConfig fit;
  /// Pin the class balance to the dev-set positive rate ("class_balance": "dev").
  bool pin_beta_to_dev = false;
  bool learn_structure = false;
  double threshold = 0.05;
  TrainConfig train;
  int port = 8080;
  std::size_t workers = 1;

  /// `p` against `base_dir` unless absolute or empty.
  fs::path resolve(const fs::path& p) const;
  /// Canonical form with paths as given. `hash()` covers everything that
  /// can change an artifact (not the port or worker count).
  nlohmann::json to_json() const;
  std::string hash() const;
  static RunConfig from_json(const nlohmann::json& doc, const fs::path& base_dir);
};

RunConfig load_run_config(const fs::path& path);

/// Corpus (segmented with the configured headers), dev labels and LFs.
struct PipelineInputs {
  Corpus corpus;
  std::vector<DevLabel> dev;
  LFSet lfset;
};

PipelineInputs load_inputs(const RunConfig& config);
/// Corpus and dev labels only.
std::pair<Corpus, std::vector<DevLabel>> load_corpus_and_dev(const RunConfig& config);

/// Fit settings with the class balance started at, or pinned to, the dev-set
/// positive rate when not set explicitly.
FitConfig fit_config_for(const RunConfig& config, const std::vector<DevLabel>& dev);

/// The configured dependency structure for `matrix`.
DependencyStructure structure_for(const RunConfig& config, const LabelMatrix& matrix, const FitConfig& fit);

// ---- artifact files ----------------------------------------------------------

struct ArtifactPaths {
  fs::path dir;
  fs::path matrix_csv() const { return dir / "matrix.csv"; }
  fs::path matrix_meta() const { return dir / "matrix.meta.json"; }
  fs::path stats() const { return dir / "stats.json"; }
  fs::path model() const { return dir / "model.json"; }
  fs::path labels() const { return dir / "labels.jsonl"; }
  fs::path labels_meta() const { return dir / "labels.meta.json"; }
  fs::path report_json() const { return dir / "report.json"; }
  fs::path report_md() const { return dir / "report.md"; }
};

LabelMatrix read_matrix(const ArtifactPaths& paths);
ModelFile read_model(const ArtifactPaths& paths);
ProbLabels read_labels(const ArtifactPaths& paths);

/// Throws VersionMismatchError unless both hashes agree.
void require_same_version(const std::string& what, const std::string& expected, const std::string& actual);

/// Score CSV `doc_id,score`.
std::string scores_to_csv(const std::vector<std::string>& ids, const std::vector<double>& scores);
std::pair<std::vector<std::string>, std::vector<double>> scores_from_csv(std::string_view csv);
/// Ground-truth CSV `doc_id,y` without corpus validation.
std::vector<DevLabel> parse_truth_csv(std::string_view csv);

// ---- stages ------------------------------------------------------------------

void cmd_apply(const RunConfig& config);
void cmd_fit(const RunConfig& config);
void cmd_label(const RunConfig& config);
void cmd_diagnose(const RunConfig& config);

struct ScaleOptions {
  SynthSpec spec;
  std::vector<std::size_t> grid = {100, 316, 1000, 3162, 10000, 31623};
  std::size_t seeds = 20;
};
void cmd_scale(const RunConfig& config, const ScaleOptions& options);

enum class Supervision { Probabilistic, MajorityVote, GroundTruth };
Supervision parse_supervision(const std::string& name);
std::string supervision_name(Supervision s);

/// Trains the end model on the configured features and writes the model plus
/// test-set scores (`scores_<arm>.csv`) when test features are configured.
void cmd_train(const RunConfig& config, Supervision supervision);

/// AUC for each score file and DeLong tests between every pair.
nlohmann::json evaluate_scores(const std::vector<fs::path>& score_files, const fs::path& truth_file);
void cmd_eval(const RunConfig& config, const std::vector<fs::path>& score_files, const fs::path& truth_file);

// ---- demo --------------------------------------------------------------------

/// LF file used by the demo corpus; refers to `lexicon.txt` beside it.
std::string demo_lf_file();
std::string demo_lexicon();

struct DemoOptions {
  std::size_t n = 1000;
  std::size_t n_test = 500;
  std::uint64_t seed = 0;
  std::size_t d = 20;
};

/// Writes corpus, dev labels, LFs, lexicon, features, truth and config.json.
void write_demo(const fs::path& dir, const DemoOptions& options = {});

}  // namespace labelforge
