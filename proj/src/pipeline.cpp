#include "labelforge/pipeline.hpp"

#include "labelforge/error.hpp"
#include "labelforge/synth.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_map>

namespace labelforge {

using nlohmann::json;

namespace {

std::string path_str(const fs::path& p) { return p.generic_string(); }

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path_str(path) + ": " + e.what());
  }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

void take_path(const json& obj, const char* key, fs::path& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<std::string>();
}

json fit_to_json(const FitConfig& f) {
  json out = {{"seed", f.seed}, {"max_iter", f.max_iter}, {"tol", f.tol}, {"step", f.step},
              {"step_growth", f.step_growth}};
  out["init_beta"] = f.init_beta ? json(*f.init_beta) : json(nullptr);
  out["fixed_beta"] = f.fixed_beta ? json(*f.fixed_beta) : json(nullptr);
  return out;
}

void fit_from_json(const json& obj, FitConfig& f) {
  take(obj, "seed", f.seed);
  take(obj, "max_iter", f.max_iter);
  take(obj, "tol", f.tol);
  take(obj, "step", f.step);
  take(obj, "step_growth", f.step_growth);
  if (obj.contains("init_beta")) {
    f.init_beta = obj.at("init_beta").is_null() ? std::nullopt : std::optional(obj.at("init_beta").get<double>());
  }
  if (obj.contains("fixed_beta")) {
    f.fixed_beta = obj.at("fixed_beta").is_null() ? std::nullopt : std::optional(obj.at("fixed_beta").get<double>());
  }
}

std::vector<std::string> dev_ids_of(const std::vector<DevLabel>& dev) {
  std::vector<std::string> ids;
  ids.reserve(dev.size());
  for (const auto& d : dev) ids.push_back(d.doc_id);
  return ids;
}

std::string current_lfset_version(const RunConfig& config) { return load_lf_file(config.resolve(config.lf_file)).version; }

}  // namespace

// ---- RunConfig ---------------------------------------------------------------

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

json RunConfig::to_json() const {
  return {{"corpus", path_str(corpus_path)},
          {"id_field", id_field},
          {"text_field", text_field},
          {"headers", headers},
          {"lf_file", path_str(lf_file)},
          {"dev_labels", path_str(dev_labels)},
          {"features", path_str(features)},
          {"truth", path_str(truth)},
          {"test_features", path_str(test_features)},
          {"test_truth", path_str(test_truth)},
          {"output_dir", path_str(output_dir)},
          {"fit", fit_to_json(fit)},
          {"class_balance", pin_beta_to_dev ? "dev" : "learn"},
          {"structure", learn_structure ? "learn" : "independent"},
          {"threshold", threshold},
          {"train", {{"seed", train.seed}, {"max_iter", train.max_iter}, {"tol", train.tol}, {"step", train.step},
                     {"l2", train.l2}}},
          {"port", port},
          {"workers", workers}};
}

std::string RunConfig::hash() const {
  json doc = to_json();
  doc.erase("port");
  doc.erase("workers");
  return sha256_hex(doc.dump());
}

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ParseError("config must be a JSON object");
  static const std::set<std::string> known = {"corpus",        "id_field",   "text_field", "headers",   "lf_file",
                                              "dev_labels",    "features",   "truth",      "test_features",
                                              "test_truth",    "output_dir", "fit",        "class_balance",
                                              "structure",     "threshold",  "train",      "port",      "workers"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ParseError("config: unknown key \"" + key + "\"");
  }
  RunConfig c;
  c.base_dir = base_dir;
  try {
    take_path(doc, "corpus", c.corpus_path);
    take(doc, "id_field", c.id_field);
    take(doc, "text_field", c.text_field);
    take(doc, "headers", c.headers);
    take_path(doc, "lf_file", c.lf_file);
    take_path(doc, "dev_labels", c.dev_labels);
    take_path(doc, "features", c.features);
    take_path(doc, "truth", c.truth);
    take_path(doc, "test_features", c.test_features);
    take_path(doc, "test_truth", c.test_truth);
    take_path(doc, "output_dir", c.output_dir);
    if (doc.contains("fit")) fit_from_json(doc.at("fit"), c.fit);
    if (doc.contains("class_balance")) {
      const auto s = doc.at("class_balance").get<std::string>();
      if (s != "learn" && s != "dev") throw ParseError("config: class_balance must be \"learn\" or \"dev\"");
      c.pin_beta_to_dev = s == "dev";
    }
    if (doc.contains("structure")) {
      const auto s = doc.at("structure").get<std::string>();
      if (s != "learn" && s != "independent") throw ParseError("config: structure must be \"learn\" or \"independent\"");
      c.learn_structure = s == "learn";
    }
    take(doc, "threshold", c.threshold);
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      take(t, "seed", c.train.seed);
      take(t, "max_iter", c.train.max_iter);
      take(t, "tol", c.train.tol);
      take(t, "step", c.train.step);
      take(t, "l2", c.train.l2);
    }
    take(doc, "port", c.port);
    take(doc, "workers", c.workers);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.fit.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError("config file not found: " + path_str(path));
  return RunConfig::from_json(read_json(path), path.parent_path());
}

// ---- inputs ------------------------------------------------------------------

std::pair<Corpus, std::vector<DevLabel>> load_corpus_and_dev(const RunConfig& config) {
  if (config.corpus_path.empty()) throw Error("config: no corpus path");
  Corpus corpus = load_corpus(config.resolve(config.corpus_path), config.id_field, config.text_field);
  if (!config.headers.empty()) corpus = segment_corpus(corpus, config.headers);
  std::vector<DevLabel> dev;
  if (!config.dev_labels.empty()) dev = load_dev_labels(config.resolve(config.dev_labels), corpus);
  return {std::move(corpus), std::move(dev)};
}

PipelineInputs load_inputs(const RunConfig& config) {
  if (config.lf_file.empty()) throw Error("config: no LF file");
  LFSet lfset = load_lf_file(config.resolve(config.lf_file));
  auto [corpus, dev] = load_corpus_and_dev(config);
  return {std::move(corpus), std::move(dev), std::move(lfset)};
}

FitConfig fit_config_for(const RunConfig& config, const std::vector<DevLabel>& dev) {
  FitConfig f = config.fit;
  if (!f.init_beta && !f.fixed_beta && !dev.empty()) {
    const auto pos = std::count_if(dev.begin(), dev.end(), [](const DevLabel& d) { return d.y > 0; });
    const double rate = std::clamp(static_cast<double>(pos) / static_cast<double>(dev.size()), 0.01, 0.99);
    if (config.pin_beta_to_dev) {
      f.fixed_beta = rate;
    } else {
      f.init_beta = rate;
    }
  }
  return f;
}

DependencyStructure structure_for(const RunConfig& config, const LabelMatrix& matrix, const FitConfig& fit) {
  if (!config.learn_structure) return {};
  return learn_structure(matrix, config.threshold, fit);
}

// ---- artifact files ----------------------------------------------------------

LabelMatrix read_matrix(const ArtifactPaths& paths) {
  return matrix_from_csv(read_file(paths.matrix_csv()), read_json(paths.matrix_meta()));
}

ModelFile read_model(const ArtifactPaths& paths) { return model_from_json(read_json(paths.model())); }

ProbLabels read_labels(const ArtifactPaths& paths) {
  ProbLabels labels = prob_labels_from_jsonl(read_file(paths.labels()));
  const json meta = read_json(paths.labels_meta());
  labels.model_version = meta.value("model_version", std::string{});
  return labels;
}

void require_same_version(const std::string& what, const std::string& expected, const std::string& actual) {
  if (expected != actual) {
    throw VersionMismatchError("version mismatch: " + what + " (expected LFSet " + expected + ", found " + actual + ")");
  }
}

std::string scores_to_csv(const std::vector<std::string>& ids, const std::vector<double>& scores) {
  if (ids.size() != scores.size()) throw Error("scores_to_csv: length mismatch");
  std::string out = "doc_id,score\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out += ids[i] + "," + format_double(scores[i]) + "\n";
  return out;
}

namespace {

// Two-column CSV with a fixed header; calls `row(line_no, first, second)`.
template <typename F>
void for_each_pair_row(std::string_view csv, std::string_view header, const char* what, F&& row) {
  std::size_t line_no = 0;
  while (!csv.empty()) {
    ++line_no;
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != header) throw ParseError(std::string(what) + ": header must be \"" + std::string(header) + "\"");
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) {
      throw ParseError(std::string(what) + " line " + std::to_string(line_no) + ": expected two fields");
    }
    row(line_no, std::string(line.substr(0, comma)), line.substr(comma + 1));
  }
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<double>> scores_from_csv(std::string_view csv) {
  std::pair<std::vector<std::string>, std::vector<double>> out;
  for_each_pair_row(csv, "doc_id,score", "scores csv", [&](std::size_t line_no, std::string id, std::string_view v) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
      throw ParseError("scores csv line " + std::to_string(line_no) + ": bad score");
    }
    out.first.push_back(std::move(id));
    out.second.push_back(value);
  });
  return out;
}

std::vector<DevLabel> parse_truth_csv(std::string_view csv) {
  std::vector<DevLabel> out;
  for_each_pair_row(csv, "doc_id,y", "truth csv", [&](std::size_t line_no, std::string id, std::string_view v) {
    int y = 0;
    if (v == "1" || v == "+1") {
      y = 1;
    } else if (v == "-1") {
      y = -1;
    } else {
      throw ParseError("truth csv line " + std::to_string(line_no) + ": y must be -1 or 1");
    }
    out.push_back({std::move(id), y});
  });
  return out;
}

// ---- stages ------------------------------------------------------------------

void cmd_apply(const RunConfig& config) {
  const auto in = load_inputs(config);
  ApplyWarnings warnings;
  const LabelMatrix matrix = apply_all(in.lfset, in.corpus, {config.workers}, &warnings);
  const ArtifactPaths out{config.resolve(config.output_dir)};

  json meta = matrix_sidecar(matrix);
  meta["config_hash"] = config.hash();
  meta["matrix_sha256"] = sha256_hex(matrix_to_csv(matrix));
  meta["missing_section_warnings"] = warnings.missing_section.load();
  json stats = stats_to_json(compute_stats(matrix, in.dev), matrix);
  stats["config_hash"] = config.hash();

  write_file(out.matrix_csv(), matrix_to_csv(matrix));
  write_file(out.matrix_meta(), dump(meta));
  write_file(out.stats(), dump(stats));
}

void cmd_fit(const RunConfig& config) {
  const ArtifactPaths out{config.resolve(config.output_dir)};
  const LabelMatrix matrix = read_matrix(out);
  require_same_version("label matrix is stale for the current LF file", current_lfset_version(config),
                       matrix.lfset_version());
  auto [corpus, dev] = load_corpus_and_dev(config);
  const FitConfig fc = fit_config_for(config, dev);
  const DependencyStructure structure = structure_for(config, matrix, fc);
  const FitResult fr = fit(matrix, structure, fc);

  json meta = {{"iterations", fr.iterations},
               {"objective", fr.objective},
               {"converged", fr.converged},
               {"flipped", fr.flipped},
               {"config", fit_to_json(fc)},
               {"structure", config.learn_structure ? "learn" : "independent"},
               {"threshold", config.threshold},
               {"config_hash", config.hash()}};
  ModelFile mf{fr.params, structure, matrix.col_names(), matrix.lfset_version(), meta};
  write_file(out.model(), dump(model_to_json(mf)));
}

void cmd_label(const RunConfig& config) {
  const ArtifactPaths out{config.resolve(config.output_dir)};
  const LabelMatrix matrix = read_matrix(out);
  const ModelFile model = read_model(out);
  require_same_version("model and label matrix come from different LF sets", matrix.lfset_version(),
                       model.lfset_version);
  require_same_version("artifacts are stale for the current LF file", current_lfset_version(config),
                       matrix.lfset_version());
  if (model.lf_names != matrix.col_names()) throw VersionMismatchError("version mismatch: model LF names differ");
  auto [corpus, dev] = load_corpus_and_dev(config);
  const ProbLabels labels = emit_labels(model.params, model.structure, matrix, dev_ids_of(dev));
  const std::string body = prob_labels_to_jsonl(labels);
  const auto excluded = labels.excluded_ids().size();
  json meta = {{"lfset_version", matrix.lfset_version()},
               {"model_version", labels.model_version},
               {"config_hash", config.hash()},
               {"n", labels.rows.size()},
               {"n_excluded", excluded},
               {"labels_sha256", sha256_hex(body)}};
  write_file(out.labels(), body);
  write_file(out.labels_meta(), dump(meta));
}

void cmd_diagnose(const RunConfig& config) {
  const ArtifactPaths out{config.resolve(config.output_dir)};
  const LabelMatrix matrix = read_matrix(out);
  const ModelFile model = read_model(out);
  require_same_version("model and label matrix come from different LF sets", matrix.lfset_version(),
                       model.lfset_version);
  auto [corpus, dev] = load_corpus_and_dev(config);
  const LFReport report = lf_report(matrix, dev, &model.params);
  json doc = report.to_json();
  doc["config_hash"] = config.hash();
  write_file(out.report_json(), dump(doc));
  write_file(out.report_md(), report.to_markdown());
}

void cmd_scale(const RunConfig& config, const ScaleOptions& options) {
  std::vector<std::uint64_t> seeds(options.seeds);
  for (std::size_t s = 0; s < seeds.size(); ++s) seeds[s] = config.fit.seed + s;
  const ScalingResult r = scaling_experiment(options.spec, options.grid, seeds, config.fit);
  const fs::path dir = config.resolve(config.output_dir);
  write_file(dir / "scaling.json", dump(r.to_json()));
  write_file(dir / "scaling.csv", r.to_csv());
  write_file(dir / "scaling.md", r.to_markdown());
}

Supervision parse_supervision(const std::string& name) {
  if (name == "dp" || name == "probabilistic") return Supervision::Probabilistic;
  if (name == "mv" || name == "majority") return Supervision::MajorityVote;
  if (name == "fs" || name == "truth") return Supervision::GroundTruth;
  throw Error("unknown supervision \"" + name + "\" (expected dp, mv or fs)");
}

std::string supervision_name(Supervision s) {
  switch (s) {
    case Supervision::Probabilistic:
      return "dp";
    case Supervision::MajorityVote:
      return "mv";
    case Supervision::GroundTruth:
      return "fs";
  }
  return "dp";
}

void cmd_train(const RunConfig& config, Supervision supervision) {
  const ArtifactPaths out{config.resolve(config.output_dir)};
  if (config.features.empty()) throw Error("config: no features path");
  const FeatureMatrix x = features_from_csv(read_file(config.resolve(config.features)));
  const std::string arm = supervision_name(supervision);

  LinearEndModel model;
  json provenance = {{"supervision", arm}, {"config_hash", config.hash()}};
  if (supervision == Supervision::GroundTruth) {
    if (config.truth.empty()) throw Error("config: fs supervision needs a truth path");
    auto [corpus, dev] = load_corpus_and_dev(config);
    std::unordered_map<std::string, int> truth;
    for (const auto& t : parse_truth_csv(read_file(config.resolve(config.truth)))) truth[t.doc_id] = t.y;
    std::unordered_map<std::string, bool> is_dev;
    for (const auto& d : dev) is_dev[d.doc_id] = true;
    std::vector<bool> keep(x.n());
    std::vector<int> y;
    for (std::size_t i = 0; i < x.n(); ++i) {
      const auto it = truth.find(x.ids[i]);
      if (it == truth.end()) throw Error("truth labels missing for \"" + x.ids[i] + "\"");
      keep[i] = !is_dev.contains(x.ids[i]);
      if (keep[i]) y.push_back(it->second);
    }
    model = train_supervised(x.select(keep), y, config.train);
  } else {
    ProbLabels labels;
    if (supervision == Supervision::Probabilistic) {
      labels = read_labels(out);
      const json meta = read_json(out.labels_meta());
      require_same_version("labels are stale for the current LF file", current_lfset_version(config),
                           meta.value("lfset_version", std::string{}));
      provenance["lfset_version"] = meta.value("lfset_version", std::string{});
    } else {
      const LabelMatrix matrix = read_matrix(out);
      require_same_version("label matrix is stale for the current LF file", current_lfset_version(config),
                           matrix.lfset_version());
      auto [corpus, dev] = load_corpus_and_dev(config);
      labels = majority_vote(matrix);
      std::unordered_map<std::string, bool> is_dev;
      for (const auto& d : dev) is_dev[d.doc_id] = true;
      for (auto& r : labels.rows) r.excluded = is_dev.contains(r.doc_id);
      provenance["lfset_version"] = matrix.lfset_version();
    }
    provenance["labels_version"] = labels.model_version;
    model = train_noise_aware(x, labels, config.train);
  }

  json doc = end_model_to_json(model);
  doc["provenance"] = provenance;
  write_file(out.dir / ("end_model_" + arm + ".json"), dump(doc));
  if (!config.test_features.empty()) {
    const FeatureMatrix test = features_from_csv(read_file(config.resolve(config.test_features)));
    write_file(out.dir / ("scores_" + arm + ".csv"), scores_to_csv(test.ids, model.scores(test)));
  }
}

json evaluate_scores(const std::vector<fs::path>& score_files, const fs::path& truth_file) {
  if (score_files.empty()) throw Error("eval: at least one score file required");
  const auto truth = parse_truth_csv(read_file(truth_file));
  std::vector<int> y;
  for (const auto& t : truth) y.push_back(t.y);

  std::vector<std::string> names;
  std::vector<std::vector<double>> aligned;
  for (const auto& file : score_files) {
    const auto [ids, scores] = scores_from_csv(read_file(file));
    std::unordered_map<std::string, double> by_id;
    for (std::size_t i = 0; i < ids.size(); ++i) by_id[ids[i]] = scores[i];
    std::vector<double> s;
    s.reserve(truth.size());
    for (const auto& t : truth) {
      const auto it = by_id.find(t.doc_id);
      if (it == by_id.end()) throw Error("eval: " + path_str(file) + " has no score for \"" + t.doc_id + "\"");
      s.push_back(it->second);
    }
    names.push_back(file.stem().string());
    aligned.push_back(std::move(s));
  }

  const auto n_pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  json models = json::object();
  for (std::size_t a = 0; a < names.size(); ++a) {
    models[names[a]] = {{"auc", roc_auc(aligned[a], y)}, {"n_pos", n_pos}, {"n_neg", y.size() - n_pos}};
  }
  json comparisons = json::object();
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      comparisons[names[a] + " vs. " + names[b]] = delong_to_json(delong_test(aligned[a], aligned[b], y));
    }
  }
  return {{"models", models}, {"delong", comparisons}};
}

void cmd_eval(const RunConfig& config, const std::vector<fs::path>& score_files, const fs::path& truth_file) {
  json doc = evaluate_scores(score_files, truth_file);
  doc["config_hash"] = config.hash();
  write_file(config.resolve(config.output_dir) / "eval.json", dump(doc));
}

// ---- demo --------------------------------------------------------------------

std::string demo_lf_file() {
  const json doc = {
      {"lfs",
       json::array({
           {{"name", "lf_abnormal_term"},
            {"emit", 1},
            {"rule", {{"negation_guard", {{"window", 4}, {"rule", {{"term_list", "lexicon.txt"}}}}}}}},
           {{"name", "lf_pneumo"},
            {"emit", 1},
            {"rule", {{"negation_guard", {{"window", 3}, {"rule", {{"prefix_word", "pneumo"}}}}}}}},
           {{"name", "lf_impression_abnormal"},
            {"emit", 1},
            {"rule",
             {{"in_section",
               {{"name", "IMPRESSION"},
                {"rule", {{"any", json::array({{{"contains", "abnormal"}},
                                                {{"contains", "follow up"}},
                                                {{"regex", "as described above"}}})}}}}}}}},
           {{"name", "lf_impression_normal"},
            {"emit", -1},
            {"rule",
             {{"in_section",
               {{"name", "IMPRESSION"},
                {"rule", {{"any", json::array({{{"contains", "normal"}},
                                                {{"contains", "unremarkable"}},
                                                {{"contains", "no acute"}}})}}}}}}}},
           {{"name", "lf_short_normal"}, {"emit", -1}, {"rule", {{"length_below", 28}}}},
       })}};
  return doc.dump(2) + "\n";
}

std::string demo_lexicon() {
  std::string out;
  for (const auto& term : abnormality_lexicon()) out += term + "\n";
  return out;
}

void write_demo(const fs::path& dir, const DemoOptions& options) {
  const TextCorpusOptions corpus_options;
  const TextCorpus tc = gen_text_corpus(options.n, options.seed, corpus_options);
  write_file(dir / "corpus.jsonl", corpus_to_jsonl(tc.corpus));
  write_file(dir / "dev.csv", dev_labels_to_csv(tc.dev));
  write_file(dir / "lfs.json", demo_lf_file());
  write_file(dir / "lexicon.txt", demo_lexicon());

  const auto ids = tc.corpus.ids();
  write_file(dir / "features.csv", features_to_csv(gen_features(ids, tc.y_true, options.d, 1.0, options.seed + 1)));
  std::vector<DevLabel> truth;
  for (std::size_t i = 0; i < ids.size(); ++i) truth.push_back({ids[i], tc.y_true[i]});
  write_file(dir / "truth.csv", dev_labels_to_csv(truth));

  Rng rng(options.seed + 2);
  std::vector<std::string> test_ids(options.n_test);
  std::vector<int> test_y(options.n_test);
  std::vector<DevLabel> test_truth;
  for (std::size_t i = 0; i < options.n_test; ++i) {
    test_ids[i] = "test" + std::to_string(i);
    test_y[i] = rng.bernoulli(corpus_options.positive_rate) ? 1 : -1;
    test_truth.push_back({test_ids[i], test_y[i]});
  }
  write_file(dir / "test_features.csv",
             features_to_csv(gen_features(test_ids, test_y, options.d, 1.0, options.seed + 3)));
  write_file(dir / "test_truth.csv", dev_labels_to_csv(test_truth));

  const json config = {{"corpus", "corpus.jsonl"},
                       {"id_field", "id"},
                       {"text_field", "text"},
                       {"headers", tc.headers},
                       {"lf_file", "lfs.json"},
                       {"dev_labels", "dev.csv"},
                       {"features", "features.csv"},
                       {"truth", "truth.csv"},
                       {"test_features", "test_features.csv"},
                       {"test_truth", "test_truth.csv"},
                       {"output_dir", "out"},
                       {"fit", {{"seed", options.seed}}},
                       {"class_balance", "dev"},
                       {"structure", "independent"},
                       {"threshold", 0.05},
                       {"port", 8080}};
  write_file(dir / "config.json", dump(config));
}

}  // namespace labelforge
