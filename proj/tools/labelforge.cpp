#include "labelforge/error.hpp"
#include "labelforge/pipeline.hpp"
#include "labelforge/server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace lf = labelforge;

namespace {

lf::ApiService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

struct Overrides {
  std::string config;
  std::string corpus, lf_file, dev_labels, features, truth, test_features, test_truth, output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> structure;
  std::optional<double> threshold;
  std::optional<int> max_iter;
  std::optional<std::size_t> workers;
  std::optional<int> port;
};

lf::RunConfig resolve_config(const Overrides& o, bool required) {
  std::string path = o.config;
  if (path.empty()) {
    if (const char* env = std::getenv("LABELFORGE_CONFIG")) path = env;
  }
  lf::RunConfig c;
  if (!path.empty()) {
    c = lf::load_run_config(path);
  } else if (required) {
    throw lf::Error("no config: pass --config or set LABELFORGE_CONFIG");
  } else {
    c.base_dir = std::filesystem::current_path();
  }
  auto set_path = [](std::filesystem::path& dst, const std::string& v) {
    if (!v.empty()) dst = std::filesystem::absolute(v);
  };
  set_path(c.corpus_path, o.corpus);
  set_path(c.lf_file, o.lf_file);
  set_path(c.dev_labels, o.dev_labels);
  set_path(c.features, o.features);
  set_path(c.truth, o.truth);
  set_path(c.test_features, o.test_features);
  set_path(c.test_truth, o.test_truth);
  set_path(c.output_dir, o.output_dir);
  if (o.seed) {
    c.fit.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.structure) c.learn_structure = *o.structure == "learn";
  if (o.threshold) c.threshold = *o.threshold;
  if (o.max_iter) c.fit.max_iter = *o.max_iter;
  if (o.workers) c.workers = *o.workers;
  if (o.port) c.port = *o.port;
  c.fit.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-supervision pipeline: labeling functions, label model, end model"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "Run config JSON (fallback: $LABELFORGE_CONFIG)");
  app.add_option("--corpus", o.corpus, "Corpus JSONL");
  app.add_option("--lf-file", o.lf_file, "LF file");
  app.add_option("--dev-labels", o.dev_labels, "Dev labels CSV");
  app.add_option("--features", o.features, "Training features CSV");
  app.add_option("--truth", o.truth, "Ground-truth CSV for fs supervision");
  app.add_option("--test-features", o.test_features, "Test features CSV");
  app.add_option("--test-truth", o.test_truth, "Test ground-truth CSV");
  app.add_option("--output-dir", o.output_dir, "Artifact directory");
  app.add_option("--seed", o.seed, "Seed for fitting and training");
  app.add_option("--structure", o.structure, "Dependency structure")->check(CLI::IsMember({"learn", "independent"}));
  app.add_option("--threshold", o.threshold, "Structure-learning threshold");
  app.add_option("--max-iter", o.max_iter, "Label-model iteration cap");
  app.add_option("--workers", o.workers, "LF application workers");
  app.add_option("--port", o.port, "Serve port");

  auto* demo = app.add_subcommand("demo", "Write a synthetic demo workspace");
  std::string demo_dir;
  lf::DemoOptions demo_opts;
  demo->add_option("dir", demo_dir, "Target directory")->required();
  demo->add_option("--n", demo_opts.n, "Documents");
  demo->add_option("--n-test", demo_opts.n_test, "Held-out feature rows");
  demo->add_option("--d", demo_opts.d, "Feature dimension");

  auto* apply = app.add_subcommand("apply", "Apply LFs and write the label matrix");
  auto* fitc = app.add_subcommand("fit", "Fit the label model");
  auto* label = app.add_subcommand("label", "Write probabilistic labels");
  auto* diagnose = app.add_subcommand("diagnose", "Write the LF report");

  auto* scale = app.add_subcommand("scale", "Estimation error versus n on synthetic data");
  lf::ScaleOptions scale_opts;
  scale_opts.spec.m = 10;
  scale_opts.spec.a_lo = 0.6;
  scale_opts.spec.a_hi = 0.95;
  scale->add_option("--grid", scale_opts.grid, "Strictly increasing n values");
  scale->add_option("--seeds", scale_opts.seeds, "Number of seeds");
  scale->add_option("--m", scale_opts.spec.m, "LFs");
  scale->add_option("--a-lo", scale_opts.spec.a_lo);
  scale->add_option("--a-hi", scale_opts.spec.a_hi);
  scale->add_option("--q-lo", scale_opts.spec.q_lo);
  scale->add_option("--q-hi", scale_opts.spec.q_hi);
  scale->add_option("--beta", scale_opts.spec.beta);

  auto* train = app.add_subcommand("train", "Train the end model");
  std::string supervision = "dp";
  train->add_option("--supervision", supervision, "dp, mv or fs")->check(CLI::IsMember({"dp", "mv", "fs"}));

  auto* eval = app.add_subcommand("eval", "AUC and DeLong tests for score files");
  std::vector<std::string> score_files;
  std::string eval_truth;
  eval->add_option("scores", score_files, "Score CSVs (doc_id,score)")->required();
  eval->add_option("--against", eval_truth, "Truth CSV (default: config test_truth)");

  auto* serve = app.add_subcommand("serve", "Serve the JSON API");
  std::string host = "127.0.0.1";
  serve->add_option("--host", host);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*demo) {
      demo_opts.seed = o.seed.value_or(0);
      lf::write_demo(demo_dir, demo_opts);
    } else if (*apply) {
      lf::cmd_apply(resolve_config(o, true));
    } else if (*fitc) {
      lf::cmd_fit(resolve_config(o, true));
    } else if (*label) {
      lf::cmd_label(resolve_config(o, true));
    } else if (*diagnose) {
      lf::cmd_diagnose(resolve_config(o, true));
    } else if (*scale) {
      lf::cmd_scale(resolve_config(o, false), scale_opts);
    } else if (*train) {
      lf::cmd_train(resolve_config(o, true), lf::parse_supervision(supervision));
    } else if (*eval) {
      const auto config = resolve_config(o, false);
      std::vector<std::filesystem::path> files(score_files.begin(), score_files.end());
      const std::filesystem::path truth =
          eval_truth.empty() ? config.resolve(config.test_truth) : std::filesystem::path(eval_truth);
      if (truth.empty()) throw lf::Error("eval: no truth file (use --against or config test_truth)");
      lf::cmd_eval(config, files, truth);
    } else if (*serve) {
      const auto config = resolve_config(o, true);
      lf::ApiService service(config);
      const int port = service.bind(host, config.port);
      if (port < 0) throw lf::Error("serve: cannot bind " + host + ":" + std::to_string(config.port));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on http://" << host << ":" << port << "/api\n";
      service.listen_after_bind();
      g_service = nullptr;
    }
  } catch (const lf::NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
