#pragma once

#include "labelforge/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Server;
}

namespace labelforge {

/// Immutable view of the service state; replaced wholesale on every mutation.
struct PipelineSnapshot {
  std::string lf_text;
  LFSet lfset;
  LabelMatrix matrix;
  FitConfig fit_config;
  bool learn_structure = false;
  double threshold = 0.05;
  DependencyStructure structure;
  FitResult fit;
  ProbLabels labels;
  nlohmann::json stats;
  nlohmann::json model;
  nlohmann::json dev_metrics;
};

/// JSON API over one corpus. Reads see the latest complete snapshot;
/// mutations run one at a time.
class ApiService {
 public:
  explicit ApiService(RunConfig config);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  std::shared_ptr<const PipelineSnapshot> snapshot() const;

  /// Port actually bound (`port == 0` picks a free one), or -1.
  int bind(const std::string& host, int port);
  /// Blocks until `stop()`.
  bool listen_after_bind();
  void stop();
  bool is_running() const;

  /// Replaces the LF file; throws ParseError on invalid content.
  nlohmann::json put_lfs(const std::string& text);
  /// Refits with `overrides` applied to the current fit settings.
  nlohmann::json refit(const nlohmann::json& overrides);

 private:
  std::shared_ptr<const PipelineSnapshot> build(std::string lf_text, LFSet lfset, FitConfig fit_config,
                                                bool learn_structure, double threshold) const;
  void install(std::shared_ptr<const PipelineSnapshot> next);
  void routes();

  RunConfig config_;
  Corpus corpus_;
  std::vector<DevLabel> dev_;
  nlohmann::json corpus_summary_;
  std::unique_ptr<httplib::Server> http_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const PipelineSnapshot> snapshot_;
  std::mutex writer_mutex_;
};

}  // namespace labelforge
