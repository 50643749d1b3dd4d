#include "labelforge/server.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <httplib.h>

#include <algorithm>
#include <map>

namespace labelforge {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}}, status);
}

json dev_metrics(const PipelineSnapshot& s, const std::vector<DevLabel>& dev) {
  const LFReport report = lf_report(s.matrix, dev, &s.fit.params);

  std::map<std::string, double> posterior;
  for (const auto& r : s.labels.rows) posterior.emplace(r.doc_id, r.p);
  std::vector<double> scores;
  std::vector<int> y;
  for (const auto& d : dev) {
    scores.push_back(posterior.at(d.doc_id));
    y.push_back(d.y);
  }
  json roc = {{"auc", nullptr}, {"points", json::array()}, {"n_pos", 0}, {"n_neg", 0}};
  const auto n_pos = std::count(y.begin(), y.end(), 1);
  roc["n_pos"] = n_pos;
  roc["n_neg"] = static_cast<long>(y.size()) - n_pos;
  if (n_pos > 0 && n_pos < static_cast<long>(y.size())) {
    roc["auc"] = roc_auc(scores, y);
    for (const auto& pt : roc_curve(scores, y)) roc["points"].push_back({pt.fpr, pt.tpr});
  }

  constexpr std::size_t kBins = 20;
  std::vector<std::size_t> counts(kBins, 0);
  for (const auto& r : s.labels.rows) {
    ++counts[std::min(kBins - 1, static_cast<std::size_t>(r.p * static_cast<double>(kBins)))];
  }

  return {{"lfset_version", s.lfset.version},
          {"model_version", s.labels.model_version},
          {"report", report.to_json()},
          {"dev_roc", roc},
          {"posterior_histogram", {{"bins", kBins}, {"counts", counts}}},
          {"fit",
           {{"iterations", s.fit.iterations},
            {"objective", s.fit.objective},
            {"converged", s.fit.converged},
            {"structure", s.learn_structure ? "learn" : "independent"},
            {"edges", s.structure.edges.size()}}}};
}

}  // namespace

ApiService::ApiService(RunConfig config) : config_(std::move(config)), http_(std::make_unique<httplib::Server>()) {
  auto [corpus, dev] = load_corpus_and_dev(config_);
  corpus_ = std::move(corpus);
  dev_ = std::move(dev);
  if (corpus_.empty()) throw Error("serve: corpus is empty");

  std::size_t tokens = 0;
  std::map<std::string, std::size_t> sections;
  for (const auto& d : corpus_.documents()) {
    tokens += d.token_count();
    for (const auto& sec : d.sections()) ++sections[sec.name];
  }
  const auto dev_pos = std::count_if(dev_.begin(), dev_.end(), [](const DevLabel& d) { return d.y > 0; });
  corpus_summary_ = {{"n_documents", corpus_.size()},
                     {"source_path", corpus_.source_path()},
                     {"headers", config_.headers},
                     {"mean_tokens", static_cast<double>(tokens) / static_cast<double>(corpus_.size())},
                     {"section_counts", sections},
                     {"dev_size", dev_.size()},
                     {"dev_positive", dev_pos}};

  const auto lf_path = config_.resolve(config_.lf_file);
  if (!std::filesystem::exists(lf_path)) throw NotFoundError("LF file not found: " + lf_path.generic_string());
  std::string text = read_file(lf_path);
  LFSet lfset = parse_lf_file(text, lf_path.parent_path());
  install(build(std::move(text), std::move(lfset), fit_config_for(config_, dev_), config_.learn_structure,
                config_.threshold));
  routes();
}

ApiService::~ApiService() { stop(); }

std::shared_ptr<const PipelineSnapshot> ApiService::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

void ApiService::install(std::shared_ptr<const PipelineSnapshot> next) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(next);
}

std::shared_ptr<const PipelineSnapshot> ApiService::build(std::string lf_text, LFSet lfset, FitConfig fit_config,
                                                          bool learn, double threshold) const {
  auto s = std::make_shared<PipelineSnapshot>();
  s->lf_text = std::move(lf_text);
  s->lfset = std::move(lfset);
  s->matrix = apply_all(s->lfset, corpus_, {config_.workers});
  s->fit_config = std::move(fit_config);
  s->learn_structure = learn;
  s->threshold = threshold;
  s->structure = learn ? learn_structure(s->matrix, threshold, s->fit_config) : DependencyStructure{};
  s->fit = fit(s->matrix, s->structure, s->fit_config);
  std::vector<std::string> dev_ids;
  for (const auto& d : dev_) dev_ids.push_back(d.doc_id);
  s->labels = emit_labels(s->fit.params, s->structure, s->matrix, dev_ids);
  s->stats = stats_to_json(compute_stats(s->matrix, dev_), s->matrix);
  s->stats["nnz"] = s->matrix.nnz();
  json meta = {{"iterations", s->fit.iterations}, {"objective", s->fit.objective}, {"converged", s->fit.converged},
               {"flipped", s->fit.flipped}, {"structure", learn ? "learn" : "independent"}, {"threshold", threshold}};
  s->model = model_to_json({s->fit.params, s->structure, s->matrix.col_names(), s->lfset.version, meta});
  s->model["model_version"] = s->labels.model_version;
  s->dev_metrics = dev_metrics(*s, dev_);
  return s;
}

json ApiService::put_lfs(const std::string& text) {
  std::lock_guard writer(writer_mutex_);
  const auto lf_path = config_.resolve(config_.lf_file);
  LFSet lfset = parse_lf_file(text, lf_path.parent_path());
  const auto current = snapshot();
  auto next = build(text, std::move(lfset), current->fit_config, current->learn_structure, current->threshold);
  write_file(lf_path, text);
  install(next);
  return next->dev_metrics;
}

json ApiService::refit(const json& overrides) {
  std::lock_guard writer(writer_mutex_);
  if (!overrides.is_object()) throw ParseError("fit overrides must be a JSON object");
  const auto current = snapshot();
  FitConfig cfg = current->fit_config;
  bool learn = current->learn_structure;
  double threshold = current->threshold;
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "max_iter") {
        cfg.max_iter = value.get<int>();
      } else if (key == "tol") {
        cfg.tol = value.get<double>();
      } else if (key == "step") {
        cfg.step = value.get<double>();
      } else if (key == "step_growth") {
        cfg.step_growth = value.get<double>();
      } else if (key == "init_beta") {
        cfg.init_beta = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      } else if (key == "fixed_beta") {
        cfg.fixed_beta = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      } else if (key == "class_balance") {
        const auto mode = value.get<std::string>();
        if (mode != "learn" && mode != "dev") throw ParseError("class_balance must be \"learn\" or \"dev\"");
        RunConfig probe = config_;
        probe.pin_beta_to_dev = mode == "dev";
        probe.fit = cfg;
        probe.fit.init_beta.reset();
        probe.fit.fixed_beta.reset();
        const FitConfig balanced = fit_config_for(probe, dev_);
        cfg.init_beta = balanced.init_beta;
        cfg.fixed_beta = balanced.fixed_beta;
      } else if (key == "structure") {
        const auto s = value.get<std::string>();
        if (s != "learn" && s != "independent") throw ParseError("structure must be \"learn\" or \"independent\"");
        learn = s == "learn";
      } else if (key == "threshold") {
        threshold = value.get<double>();
      } else {
        throw ParseError("unknown fit override \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("fit overrides: ") + e.what());
  }
  try {
    cfg.validate();
    if (learn && !(threshold > 0.0)) throw Error("structure threshold must be > 0");
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  auto next = build(current->lf_text, current->lfset, cfg, learn, threshold);
  install(next);
  return next->dev_metrics;
}

void ApiService::routes() {
  auto& s = *http_;
  s.Get("/api/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, {{"status", "ok"}}); });
  s.Get("/api/corpus/summary",
        [this](const httplib::Request&, httplib::Response& res) { send_json(res, corpus_summary_); });
  s.Get("/api/lfs", [this](const httplib::Request&, httplib::Response& res) {
    const auto snap = snapshot();
    send_json(res, {{"version", snap->lfset.version}, {"text", snap->lf_text}, {"lfs", lfset_to_json(snap->lfset)["lfs"]}});
  });
  s.Put("/api/lfs", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, put_lfs(req.body));
    } catch (const ParseError& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
  s.Post("/api/fit", [this](const httplib::Request& req, httplib::Response& res) {
    json overrides = json::object();
    if (!req.body.empty()) {
      try {
        overrides = json::parse(req.body);
      } catch (const json::parse_error& e) {
        send_error(res, 400, std::string("request body is not valid JSON: ") + e.what());
        return;
      }
    }
    try {
      send_json(res, refit(overrides));
    } catch (const ParseError& e) {
      send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
  s.Get("/api/matrix/stats",
        [this](const httplib::Request&, httplib::Response& res) { send_json(res, snapshot()->stats); });
  s.Get("/api/dev/metrics",
        [this](const httplib::Request&, httplib::Response& res) { send_json(res, snapshot()->dev_metrics); });
  s.Get("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
    const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("jsonl");
    const auto snap = snapshot();
    if (format == "jsonl") {
      res.set_header("X-LFSet-Version", snap->lfset.version);
      res.set_content(prob_labels_to_jsonl(snap->labels), "application/x-ndjson");
    } else {
      send_error(res, 400, "unsupported format \"" + format + "\" (expected jsonl)");
    }
  });
  s.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) { send_json(res, snapshot()->model); });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not found");
  });
}

int ApiService::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  return http_->bind_to_port(host, port) ? port : -1;
}

bool ApiService::listen_after_bind() { return http_->listen_after_bind(); }

void ApiService::stop() {
  if (http_) http_->stop();
}

bool ApiService::is_running() const { return http_ && http_->is_running(); }

}  // namespace labelforge
