#include "labelforge/end_model.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace labelforge {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void check_binary(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 1 && y != -1) throw Error("labels must be -1 or +1");
  }
}

/// Shared descent loop. `loss_and_grad(w, b, gw, gb)` returns the mean data
/// loss and fills its gradient; the L2 term is added here.
template <typename LossFn>
LinearEndModel descend(std::size_t d, const TrainConfig& cfg, LossFn&& loss_and_grad) {
  if (cfg.max_iter < 1 || !(cfg.step > 0) || !(cfg.tol > 0) || cfg.l2 < 0) throw Error("invalid train config");
  LinearEndModel model;
  model.seed = cfg.seed;
  model.weights.assign(d, 0.0);
  std::vector<double> gw(d), cand_w(d), cand_gw(d);
  double gb = 0.0, cand_gb = 0.0;

  auto total = [&](const std::vector<double>& w, double b, std::vector<double>& g, double& g_bias) {
    double f = loss_and_grad(w, b, g, g_bias);
    for (std::size_t k = 0; k < d; ++k) {
      f += 0.5 * cfg.l2 * w[k] * w[k];
      g[k] += cfg.l2 * w[k];
    }
    return f;
  };

  double f = total(model.weights, model.bias, gw, gb);
  double step = cfg.step;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    double f_new = f;
    double cand_b = model.bias;
    bool accepted = false;
    while (step > 1e-14) {
      for (std::size_t k = 0; k < d; ++k) cand_w[k] = model.weights[k] - step * gw[k];
      cand_b = model.bias - step * gb;
      f_new = total(cand_w, cand_b, cand_gw, cand_gb);
      if (f_new <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    model.iterations = iter + 1;
    if (!accepted) {
      model.converged = true;
      break;
    }
    const double change = std::abs(f - f_new) / std::max(std::abs(f), 1e-300);
    model.weights.swap(cand_w);
    gw.swap(cand_gw);
    model.bias = cand_b;
    gb = cand_gb;
    f = f_new;
    if (change < cfg.tol) {
      model.converged = true;
      break;
    }
  }
  model.final_loss = f;
  if (!std::isfinite(f)) throw Error("training produced a non-finite loss");
  return model;
}

}  // namespace

void FeatureMatrix::validate() const {
  if (values.size() != ids.size() * d) throw Error("feature matrix: shape mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("feature matrix: non-finite value");
  }
}

FeatureMatrix FeatureMatrix::select(const std::vector<bool>& keep) const {
  if (keep.size() != n()) throw Error("feature matrix: selection mask has the wrong length");
  FeatureMatrix out;
  out.d = d;
  for (std::size_t i = 0; i < n(); ++i) {
    if (!keep[i]) continue;
    out.ids.push_back(ids[i]);
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
  }
  return out;
}

std::string features_to_csv(const FeatureMatrix& x) {
  std::string out = "doc_id";
  for (std::size_t k = 0; k < x.d; ++k) out += ",f" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < x.n(); ++i) {
    out += x.ids[i];
    for (double v : x.row(i)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix features_from_csv(std::string_view csv) {
  FeatureMatrix x;
  std::size_t line_no = 0;
  bool header = true;
  while (!csv.empty()) {
    ++line_no;
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (header) {
      if (fields.empty() || fields[0] != "doc_id") throw ParseError("feature csv: header must start with doc_id");
      x.d = fields.size() - 1;
      header = false;
      continue;
    }
    if (fields.size() != x.d + 1) throw ParseError("feature csv line " + std::to_string(line_no) + ": wrong arity");
    x.ids.emplace_back(fields[0]);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      double v = 0.0;
      auto res = std::from_chars(fields[k].data(), fields[k].data() + fields[k].size(), v);
      if (res.ec != std::errc{} || res.ptr != fields[k].data() + fields[k].size()) {
        throw ParseError("feature csv line " + std::to_string(line_no) + ": bad number");
      }
      x.values.push_back(v);
    }
  }
  x.validate();
  return x;
}

double logistic_loss(double score, int y) { return softplus(-static_cast<double>(y) * score); }

double noise_aware_loss(double score, double p) {
  return p * softplus(-score) + (1.0 - p) * softplus(score);
}

double noise_aware_loss_grad(double score, double p) { return sigmoid(score) - p; }

double LinearEndModel::score(std::span<const double> x) const {
  if (x.size() != weights.size()) throw Error("feature dimension does not match the model");
  double s = bias;
  for (std::size_t k = 0; k < x.size(); ++k) s += weights[k] * x[k];
  return s;
}

std::vector<double> LinearEndModel::scores(const FeatureMatrix& x) const {
  std::vector<double> out;
  out.reserve(x.n());
  for (std::size_t i = 0; i < x.n(); ++i) out.push_back(score(x.row(i)));
  return out;
}

nlohmann::json end_model_to_json(const LinearEndModel& m) {
  return {{"weights", m.weights},   {"bias", m.bias},           {"seed", m.seed},
          {"iterations", m.iterations}, {"final_loss", m.final_loss}, {"converged", m.converged}};
}

LinearEndModel end_model_from_json(const nlohmann::json& doc) {
  LinearEndModel m;
  try {
    m.weights = doc.at("weights").get<std::vector<double>>();
    m.bias = doc.at("bias").get<double>();
    m.seed = doc.value("seed", std::uint64_t{0});
    m.iterations = doc.value("iterations", 0);
    m.final_loss = doc.value("final_loss", 0.0);
    m.converged = doc.value("converged", false);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("end model file: ") + e.what());
  }
  return m;
}

LinearEndModel train_noise_aware(const FeatureMatrix& x, const ProbLabels& labels, const TrainConfig& config) {
  x.validate();
  const std::size_t common = std::min(x.n(), labels.rows.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (x.ids[i] != labels.rows[i].doc_id) {
      throw Error("feature/label id mismatch at row " + std::to_string(i) + ": \"" + x.ids[i] + "\" vs \"" +
                  labels.rows[i].doc_id + "\"");
    }
  }
  if (x.n() != labels.rows.size()) {
    const auto& id = x.n() > labels.rows.size() ? x.ids[common] : labels.rows[common].doc_id;
    throw Error("feature/label id mismatch: \"" + id + "\" has no counterpart");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < x.n(); ++i) {
    if (!labels.rows[i].excluded) rows.push_back(i);
  }
  if (rows.empty()) throw Error("no training rows left after excluding dev rows");
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  return descend(x.d, config, [&](const std::vector<double>& w, double b, std::vector<double>& g, double& gb) {
    std::fill(g.begin(), g.end(), 0.0);
    gb = 0.0;
    double loss = 0.0;
    for (std::size_t i : rows) {
      const auto xi = x.row(i);
      double s = b;
      for (std::size_t k = 0; k < x.d; ++k) s += w[k] * xi[k];
      const double p = labels.rows[i].p;
      loss += noise_aware_loss(s, p);
      const double ds = noise_aware_loss_grad(s, p);
      for (std::size_t k = 0; k < x.d; ++k) g[k] += ds * xi[k];
      gb += ds;
    }
    for (auto& v : g) v *= inv_n;
    gb *= inv_n;
    return loss * inv_n;
  });
}

LinearEndModel train_supervised(const FeatureMatrix& x, std::span<const int> y, const TrainConfig& config) {
  x.validate();
  if (y.size() != x.n()) throw Error("label count does not match feature rows");
  if (y.empty()) throw Error("no training rows");
  check_binary(y);
  const double inv_n = 1.0 / static_cast<double>(y.size());

  return descend(x.d, config, [&](const std::vector<double>& w, double b, std::vector<double>& g, double& gb) {
    std::fill(g.begin(), g.end(), 0.0);
    gb = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) {
      const auto xi = x.row(i);
      double s = b;
      for (std::size_t k = 0; k < x.d; ++k) s += w[k] * xi[k];
      const double yi = static_cast<double>(y[i]);
      loss += logistic_loss(s, y[i]);
      // d/ds log(1 + exp(-y s)) = -y * sigmoid(-y s)
      const double ds = -yi * sigmoid(-yi * s);
      for (std::size_t k = 0; k < x.d; ++k) g[k] += ds * xi[k];
      gb += ds;
    }
    for (auto& v : g) v *= inv_n;
    gb *= inv_n;
    return loss * inv_n;
  });
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("roc_auc: scores and labels differ in length");
  check_binary(labels);
  // Rank-sum form of the pairwise concordance count, average ranks on ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_auc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error("roc_curve: scores and labels differ in length");
  check_binary(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("roc_curve: both classes must be present");
  std::vector<RocPoint> pts{{0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0 ? tp : fp) += 1.0;
      ++j;
    }
    pts.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return pts;
}

DeLongComponents delong_components(std::span<const double> scores_a, std::span<const double> scores_b,
                                   std::span<const int> labels) {
  if (scores_a.size() != labels.size() || scores_b.size() != labels.size()) {
    throw Error("delong: scores and labels differ in length");
  }
  check_binary(labels);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw Error("delong: both classes must be present");

  DeLongComponents c;
  const std::array<std::span<const double>, 2> scores{scores_a, scores_b};
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  for (std::size_t r = 0; r < 2; ++r) {
    c.v10[r].assign(pos.size(), 0.0);
    c.v01[r].assign(neg.size(), 0.0);
    for (std::size_t a = 0; a < pos.size(); ++a) {
      for (std::size_t b = 0; b < neg.size(); ++b) {
        const double sp = scores[r][pos[a]];
        const double sn = scores[r][neg[b]];
        const double psi = sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
        c.v10[r][a] += psi;
        c.v01[r][b] += psi;
      }
    }
    double total = 0.0;
    for (auto& v : c.v10[r]) {
      total += v;
      v /= nn;
    }
    for (auto& v : c.v01[r]) v /= np;
    c.auc[r] = total / (np * nn);
  }
  auto covariance = [](const std::vector<double>& x, const std::vector<double>& y, double mx, double my) {
    if (x.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(x.size() - 1);
  };
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t s = 0; s < 2; ++s) {
      c.s10[r][s] = covariance(c.v10[r], c.v10[s], c.auc[r], c.auc[s]);
      c.s01[r][s] = covariance(c.v01[r], c.v01[s], c.auc[r], c.auc[s]);
      c.cov[r][s] = c.s10[r][s] / np + c.s01[r][s] / nn;
    }
  }
  return c;
}

DeLongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels) {
  const auto c = delong_components(scores_a, scores_b, labels);
  DeLongResult r;
  r.auc_a = c.auc[0];
  r.auc_b = c.auc[1];
  r.n_pos = c.v10[0].size();
  r.n_neg = c.v01[0].size();
  r.var_diff = c.cov[0][0] + c.cov[1][1] - 2.0 * c.cov[0][1];
  if (r.var_diff <= 0.0) {
    if (r.auc_a != r.auc_b) throw Error("delong: zero variance with unequal AUCs");
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  r.z = (r.auc_a - r.auc_b) / std::sqrt(r.var_diff);
  r.p = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

nlohmann::json delong_to_json(const DeLongResult& r) {
  return {{"auc_a", r.auc_a}, {"auc_b", r.auc_b}, {"z", r.z}, {"p", r.p},
          {"var_diff", r.var_diff}, {"n_pos", r.n_pos}, {"n_neg", r.n_neg}};
}

}  // namespace labelforge
