#include "labelforge/label_model.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

namespace labelforge {

namespace {

// Logit coordinates are projected onto [-kMaxLogit, kMaxLogit] so every
// probability stays strictly inside (0, 1).
constexpr double kMaxLogit = 30.0;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

double log_sum_exp(double a, double b) {
  const double hi = std::max(a, b);
  if (hi == -INFINITY) return hi;
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

std::vector<std::size_t> edge_membership(std::size_t m, const std::vector<EdgeParams>& edges) {
  std::vector<std::size_t> of(m, ParameterMap::npos);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    of.at(edges[e].j) = e;
    of.at(edges[e].k) = e;
  }
  return of;
}

void check_consistent(const GenerativeParams& params, const DependencyStructure& structure) {
  if (params.edges.size() != structure.edges.size()) throw Error("parameters do not match the dependency structure");
  for (std::size_t e = 0; e < params.edges.size(); ++e) {
    if (params.edges[e].j != structure.edges[e].first || params.edges[e].k != structure.edges[e].second) {
      throw Error("parameters do not match the dependency structure");
    }
  }
}

struct LogTables {
  std::vector<double> log_q, log_1mq, log_a, log_1ma;
  std::vector<std::array<std::array<double, 9>, 2>> log_joint;
  double log_beta = 0.0, log_1mbeta = 0.0;
};

LogTables log_tables(const GenerativeParams& p) {
  LogTables t;
  for (const auto& lf : p.lfs) {
    t.log_q.push_back(std::log(lf.propensity));
    t.log_1mq.push_back(std::log1p(-lf.propensity));
    t.log_a.push_back(std::log(lf.accuracy));
    t.log_1ma.push_back(std::log1p(-lf.accuracy));
  }
  for (const auto& e : p.edges) {
    std::array<std::array<double, 9>, 2> lj{};
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t c = 0; c < 9; ++c) lj[s][c] = std::log(e.joint[s][c]);
    }
    t.log_joint.push_back(lj);
  }
  t.log_beta = std::log(p.beta);
  t.log_1mbeta = std::log1p(-p.beta);
  return t;
}

/// log P(row | y) for y = -1 and y = +1.
std::array<double, 2> class_log_likelihoods(const GenerativeParams& p, const LogTables& t,
                                            const std::vector<std::size_t>& edge_of, std::span<const Vote> row) {
  std::array<double, 2> ll{0.0, 0.0};
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (edge_of[j] != ParameterMap::npos) continue;
    const Vote v = row[j];
    if (v == 0) {
      ll[0] += t.log_1mq[j];
      ll[1] += t.log_1mq[j];
    } else {
      ll[class_slot(v)] += t.log_q[j] + t.log_a[j];
      ll[1 - class_slot(v)] += t.log_q[j] + t.log_1ma[j];
    }
  }
  for (std::size_t e = 0; e < p.edges.size(); ++e) {
    const std::size_t cell = joint_cell(row[p.edges[e].j], row[p.edges[e].k]);
    ll[0] += t.log_joint[e][0][cell];
    ll[1] += t.log_joint[e][1][cell];
  }
  return ll;
}

void derive_edge_marginals(GenerativeParams& p) {
  for (const auto& e : p.edges) {
    for (int side = 0; side < 2; ++side) {
      double vote_mass = 0.0, correct_mass = 0.0;
      for (std::size_t s = 0; s < 2; ++s) {
        const double prior = s == 1 ? p.beta : 1.0 - p.beta;
        const Vote y = s == 1 ? 1 : -1;
        for (int a = -1; a <= 1; ++a) {
          for (int b = -1; b <= 1; ++b) {
            const Vote mine = static_cast<Vote>(side == 0 ? a : b);
            const double cell = e.joint[s][joint_cell(static_cast<Vote>(a), static_cast<Vote>(b))];
            if (mine != 0) vote_mass += prior * cell;
            if (mine == y) correct_mass += prior * cell;
          }
        }
      }
      auto& lf = p.lfs[side == 0 ? e.j : e.k];
      lf.propensity = vote_mass;
      lf.accuracy = vote_mass > 0 ? correct_mass / vote_mass : 0.5;
    }
  }
}

double clamp_logit(double x) { return std::clamp(x, -kMaxLogit, kMaxLogit); }

}  // namespace

void DependencyStructure::validate(std::size_t m) const {
  std::vector<bool> used(m, false);
  for (const auto& [j, k] : edges) {
    if (j >= m || k >= m || j >= k) throw Error("dependency edge out of range or not ordered (j < k)");
    if (used[j] || used[k]) throw Error("dependency edges must form a matching");
    used[j] = used[k] = true;
  }
}

void FitConfig::validate() const {
  if (max_iter < 1) throw Error("fit: max_iter must be >= 1");
  if (!(tol > 0)) throw Error("fit: tol must be > 0");
  if (!(step > 0)) throw Error("fit: step must be > 0");
  if (!(step_growth >= 1.0)) throw Error("fit: step_growth must be >= 1");
  auto interior = [](double p) { return p > 0.0 && p < 1.0; };
  if (init_beta && !interior(*init_beta)) throw Error("fit: init_beta must lie in (0, 1)");
  if (fixed_beta && !interior(*fixed_beta)) throw Error("fit: fixed_beta must lie in (0, 1)");
  if (fixed_propensity) {
    for (double q : *fixed_propensity) {
      if (!interior(q)) throw Error("fit: fixed propensities must lie in (0, 1)");
    }
  }
}

ParameterMap::ParameterMap(std::size_t m, const DependencyStructure& structure)
    : m_(m), edges_(structure.edges), singleton_offset_(m, npos), edge_of_(m, npos) {
  structure.validate(m);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    edge_of_[edges_[e].first] = e;
    edge_of_[edges_[e].second] = e;
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (edge_of_[j] != npos) continue;
    singleton_offset_[j] = size_;
    size_ += 2;
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    edge_offset_.push_back(size_);
    size_ += 18;
  }
}

std::vector<double> ParameterMap::to_logits(const GenerativeParams& params) const {
  if (params.lfs.size() != m_ || params.edges.size() != edges_.size()) {
    throw Error("parameters do not match the parameter map");
  }
  std::vector<double> x(size_, 0.0);
  x[0] = clamp_logit(logit(params.beta));
  for (std::size_t j = 0; j < m_; ++j) {
    if (singleton_offset_[j] == npos) continue;
    x[singleton_offset_[j]] = clamp_logit(logit(params.lfs[j].propensity));
    x[singleton_offset_[j] + 1] = clamp_logit(logit(params.lfs[j].accuracy));
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    for (std::size_t s = 0; s < 2; ++s) {
      double mean = 0.0;
      std::array<double, 9> logs{};
      for (std::size_t c = 0; c < 9; ++c) {
        logs[c] = std::log(params.edges[e].joint[s][c]);
        mean += logs[c] / 9.0;
      }
      for (std::size_t c = 0; c < 9; ++c) x[edge_offset_[e] + 9 * s + c] = clamp_logit(logs[c] - mean);
    }
  }
  return x;
}

GenerativeParams ParameterMap::from_logits(std::span<const double> x) const {
  if (x.size() != size_) throw Error("logit vector has the wrong length");
  GenerativeParams p;
  p.beta = sigmoid(x[0]);
  p.lfs.resize(m_);
  for (std::size_t j = 0; j < m_; ++j) {
    if (singleton_offset_[j] == npos) continue;
    p.lfs[j].propensity = sigmoid(x[singleton_offset_[j]]);
    p.lfs[j].accuracy = sigmoid(x[singleton_offset_[j] + 1]);
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    EdgeParams ep;
    ep.j = edges_[e].first;
    ep.k = edges_[e].second;
    for (std::size_t s = 0; s < 2; ++s) {
      const double* w = x.data() + edge_offset_[e] + 9 * s;
      const double hi = *std::max_element(w, w + 9);
      double z = 0.0;
      for (std::size_t c = 0; c < 9; ++c) z += std::exp(w[c] - hi);
      for (std::size_t c = 0; c < 9; ++c) ep.joint[s][c] = std::exp(w[c] - hi) / z;
    }
    p.edges.push_back(ep);
  }
  derive_edge_marginals(p);
  return p;
}

VotePatterns VotePatterns::from_matrix(const LabelMatrix& matrix) {
  std::map<std::vector<Vote>, double> counts;
  for (std::size_t i = 0; i < matrix.n(); ++i) counts[matrix.dense_row(i)] += 1.0;
  VotePatterns out;
  out.m = matrix.m();
  out.n = matrix.n();
  out.votes.reserve(counts.size() * out.m);
  for (const auto& [row, c] : counts) {
    out.votes.insert(out.votes.end(), row.begin(), row.end());
    out.counts.push_back(c);
  }
  return out;
}

double objective(const VotePatterns& patterns, const ParameterMap& map, std::span<const double> logits,
                 std::vector<double>* gradient) {
  if (patterns.m != map.m()) throw Error("objective: LF count mismatch");
  const GenerativeParams p = map.from_logits(logits);
  const LogTables t = log_tables(p);
  const std::size_t m = map.m();
  std::vector<std::size_t> edge_of(m);
  for (std::size_t j = 0; j < m; ++j) edge_of[j] = map.edge_of(j);

  // Expected sufficient statistics under the posterior over y.
  double total_pos = 0.0;
  std::vector<double> abstain(m, 0.0), vote_count(m, 0.0), correct(m, 0.0);
  std::vector<std::array<std::array<double, 9>, 2>> soft(p.edges.size());
  double nll = 0.0;

  for (std::size_t idx = 0; idx < patterns.size(); ++idx) {
    const auto row = patterns.pattern(idx);
    const double c = patterns.counts[idx];
    const auto ll = class_log_likelihoods(p, t, edge_of, row);
    const double lneg = t.log_1mbeta + ll[0];
    const double lpos = t.log_beta + ll[1];
    const double lse = log_sum_exp(lneg, lpos);
    nll -= c * lse;
    if (!gradient) continue;
    const std::array<double, 2> r{std::exp(lneg - lse), std::exp(lpos - lse)};
    total_pos += c * r[1];
    for (std::size_t j = 0; j < m; ++j) {
      if (edge_of[j] != ParameterMap::npos) continue;
      if (row[j] == 0) {
        abstain[j] += c;
      } else {
        vote_count[j] += c;
        correct[j] += c * r[class_slot(row[j])];
      }
    }
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      const std::size_t cell = joint_cell(row[p.edges[e].j], row[p.edges[e].k]);
      soft[e][0][cell] += c * r[0];
      soft[e][1][cell] += c * r[1];
    }
  }
  const double n = static_cast<double>(patterns.n);
  if (!std::isfinite(nll)) throw Error("fit: non-finite objective");
  if (gradient) {
    auto& g = *gradient;
    g.assign(map.size(), 0.0);
    g[map.beta_index()] = -(total_pos - n * p.beta) / n;
    for (std::size_t j = 0; j < m; ++j) {
      if (edge_of[j] != ParameterMap::npos) continue;
      const double q = p.lfs[j].propensity;
      const double a = p.lfs[j].accuracy;
      // d/du log(1-q) = -q ; d/du log q = 1-q
      g[map.propensity_index(j)] = -(vote_count[j] * (1.0 - q) - abstain[j] * q) / n;
      // d/dv: (posterior mass on y == vote) - a * votes
      g[map.accuracy_index(j)] = -(correct[j] - a * vote_count[j]) / n;
    }
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      for (std::size_t s = 0; s < 2; ++s) {
        double mass = 0.0;
        for (double v : soft[e][s]) mass += v;
        for (std::size_t cell = 0; cell < 9; ++cell) {
          g[map.edge_offset(e) + 9 * s + cell] = -(soft[e][s][cell] - p.edges[e].joint[s][cell] * mass) / n;
        }
      }
    }
  }
  return nll / n;
}

double log_likelihood_given_class(const GenerativeParams& params, std::span<const Vote> row, int y) {
  if (row.size() != params.lfs.size()) throw Error("vote row has the wrong length");
  const auto t = log_tables(params);
  return class_log_likelihoods(params, t, edge_membership(params.lfs.size(), params.edges), row)[class_slot(y)];
}

double log_marginal_likelihood(const LabelMatrix& matrix, const GenerativeParams& params,
                               const DependencyStructure& structure) {
  check_consistent(params, structure);
  if (matrix.m() != params.lfs.size()) throw Error("log_marginal_likelihood: LF count mismatch");
  const auto t = log_tables(params);
  const auto edge_of = edge_membership(params.lfs.size(), params.edges);
  double total = 0.0;
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    const auto row = matrix.dense_row(i);
    const auto ll = class_log_likelihoods(params, t, edge_of, row);
    total += log_sum_exp(t.log_1mbeta + ll[0], t.log_beta + ll[1]);
  }
  return total;
}

double predict_proba(const GenerativeParams& params, const DependencyStructure& structure,
                     std::span<const Vote> row) {
  check_consistent(params, structure);
  if (row.size() != params.lfs.size()) throw Error("predict_proba: vote row has the wrong length");
  const auto t = log_tables(params);
  const auto ll = class_log_likelihoods(params, t, edge_membership(params.lfs.size(), params.edges), row);
  const double evidence = ll[1] - ll[0];
  if (evidence == 0.0) return params.beta;
  return sigmoid(t.log_beta - t.log_1mbeta + evidence);
}

GenerativeParams flip_labels(const GenerativeParams& params) {
  GenerativeParams out = params;
  out.beta = 1.0 - params.beta;
  for (auto& lf : out.lfs) lf.accuracy = 1.0 - lf.accuracy;
  for (auto& e : out.edges) std::swap(e.joint[0], e.joint[1]);
  return out;
}

double mean_accuracy(const GenerativeParams& params) {
  if (params.lfs.empty()) return 0.5;
  double sum = 0.0;
  for (const auto& lf : params.lfs) sum += lf.accuracy;
  return sum / static_cast<double>(params.lfs.size());
}

namespace {

GenerativeParams initial_params(const LabelMatrix& matrix, const ParameterMap& map, const FitConfig& cfg) {
  const std::size_t m = matrix.m();
  GenerativeParams init;
  init.beta = cfg.fixed_beta.value_or(cfg.init_beta.value_or(0.5));
  init.lfs.resize(m);
  std::vector<double> votes(m, 0.0);
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    for (const auto& e : matrix.row(i)) votes[e.col] += 1.0;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double coverage = votes[j] / static_cast<double>(matrix.n());
    init.lfs[j].propensity = std::clamp(coverage, 0.01, 0.99);
    init.lfs[j].accuracy = 0.7;
  }
  if (cfg.fixed_propensity) {
    if (cfg.fixed_propensity->size() != m) throw Error("fit: fixed_propensity has the wrong length");
    for (std::size_t j = 0; j < m; ++j) init.lfs[j].propensity = (*cfg.fixed_propensity)[j];
  }
  if (map.edges().empty()) return init;

  // Edge tables start from one soft E-step of the all-singleton initial
  // model, with add-one pseudocounts on every cell.
  const std::vector<std::size_t> no_edges(m, ParameterMap::npos);
  const auto t = log_tables(init);
  std::vector<std::array<std::array<double, 9>, 2>> counts(map.edges().size());
  for (auto& c : counts) {
    for (auto& slice : c) slice.fill(1.0);
  }
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    const auto row = matrix.dense_row(i);
    const auto ll = class_log_likelihoods(init, t, no_edges, row);
    const double lneg = t.log_1mbeta + ll[0];
    const double lpos = t.log_beta + ll[1];
    const double lse = log_sum_exp(lneg, lpos);
    const std::array<double, 2> r{std::exp(lneg - lse), std::exp(lpos - lse)};
    for (std::size_t e = 0; e < map.edges().size(); ++e) {
      const std::size_t cell = joint_cell(row[map.edges()[e].first], row[map.edges()[e].second]);
      counts[e][0][cell] += r[0];
      counts[e][1][cell] += r[1];
    }
  }
  for (std::size_t e = 0; e < map.edges().size(); ++e) {
    EdgeParams ep;
    ep.j = map.edges()[e].first;
    ep.k = map.edges()[e].second;
    for (std::size_t s = 0; s < 2; ++s) {
      double z = 0.0;
      for (double v : counts[e][s]) z += v;
      for (std::size_t c = 0; c < 9; ++c) ep.joint[s][c] = counts[e][s][c] / z;
    }
    init.edges.push_back(ep);
  }
  derive_edge_marginals(init);
  return init;
}

}  // namespace

FitResult fit(const LabelMatrix& matrix, const DependencyStructure& structure, const FitConfig& config) {
  config.validate();
  if (matrix.n() < 1 || matrix.m() < 1) throw Error("fit: matrix must have at least one row and one column");
  const ParameterMap map(matrix.m(), structure);
  const auto patterns = VotePatterns::from_matrix(matrix);

  std::vector<bool> frozen(map.size(), false);
  if (config.fixed_beta) frozen[map.beta_index()] = true;
  if (config.fixed_propensity) {
    for (std::size_t j = 0; j < matrix.m(); ++j) {
      if (map.propensity_index(j) != ParameterMap::npos) frozen[map.propensity_index(j)] = true;
    }
  }

  std::vector<double> x = map.to_logits(initial_params(matrix, map, config));
  std::vector<double> grad, cand_grad;
  double f = objective(patterns, map, x, &grad);

  FitResult result;
  double step = config.step;
  std::vector<double> cand(x.size());
  for (int iter = 0; iter < config.max_iter; ++iter) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (frozen[i]) grad[i] = 0.0;
    }
    double f_new = f;
    bool accepted = false;
    while (step > 1e-14) {
      for (std::size_t i = 0; i < x.size(); ++i) cand[i] = clamp_logit(x[i] - step * grad[i]);
      f_new = objective(patterns, map, cand, &cand_grad);
      if (f_new <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    result.iterations = iter + 1;
    if (!accepted) {
      // No descent direction left at machine precision.
      result.converged = true;
      break;
    }
    const double change = std::abs(f - f_new) / std::max(std::abs(f), 1e-300);
    x.swap(cand);
    grad.swap(cand_grad);
    f = f_new;
    result.trace.push_back(f);
    if (change < config.tol) {
      result.converged = true;
      break;
    }
    step *= config.step_growth;
  }

  result.objective = f;
  result.params = map.from_logits(x);
  const bool flip_allowed = !config.fixed_beta || *config.fixed_beta == 0.5;
  if (flip_allowed && mean_accuracy(result.params) < 0.5) {
    result.params = flip_labels(result.params);
    result.flipped = true;
  }
  return result;
}

DependencyStructure learn_structure(const LabelMatrix& matrix, double threshold, const FitConfig& config) {
  if (!(threshold > 0)) throw Error("learn_structure: threshold must be > 0");
  DependencyStructure out;
  const std::size_t m = matrix.m();
  if (m < 2) return out;

  const auto independent = fit(matrix, DependencyStructure{}, config).params;
  const auto dense = matrix.to_dense();
  const double n = static_cast<double>(matrix.n());

  // P(vote | y) per LF under the independent fit, indexed [slot][vote + 1].
  std::vector<std::array<std::array<double, 3>, 2>> cond(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double q = independent.lfs[j].propensity;
    const double a = independent.lfs[j].accuracy;
    cond[j][0] = {q * a, 1.0 - q, q * (1.0 - a)};  // y = -1: votes -1, 0, +1
    cond[j][1] = {q * (1.0 - a), 1.0 - q, q * a};  // y = +1
  }
  const double prior[2] = {1.0 - independent.beta, independent.beta};

  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = j + 1; k < m; ++k) {
      std::array<double, 9> empirical{};
      for (std::size_t i = 0; i < matrix.n(); ++i) {
        empirical[joint_cell(dense[i * m + j], dense[i * m + k])] += 1.0 / n;
      }
      double score = 0.0;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          double implied = 0.0;
          for (std::size_t s = 0; s < 2; ++s) implied += prior[s] * cond[j][s][a] * cond[k][s][b];
          score += std::abs(empirical[3 * a + b] - implied);
        }
      }
      out.scores.push_back({j, k, score});
    }
  }
  std::stable_sort(out.scores.begin(), out.scores.end(),
                   [](const PairScore& a, const PairScore& b) { return a.score > b.score; });
  std::vector<bool> used(m, false);
  for (const auto& s : out.scores) {
    if (s.score <= threshold) break;
    if (used[s.j] || used[s.k]) continue;
    used[s.j] = used[s.k] = true;
    out.edges.emplace_back(s.j, s.k);
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

ProbLabels emit_labels(const GenerativeParams& params, const DependencyStructure& structure,
                       const LabelMatrix& matrix, const std::vector<std::string>& dev_ids) {
  check_consistent(params, structure);
  const std::unordered_set<std::string> dev(dev_ids.begin(), dev_ids.end());
  ProbLabels out;
  out.rows.reserve(matrix.n());
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    const auto& id = matrix.row_ids()[i];
    out.rows.push_back({id, predict_proba(params, structure, matrix.dense_row(i)), dev.contains(id)});
  }
  ModelFile mf{params, structure, matrix.col_names(), matrix.lfset_version(), {}};
  out.model_version = sha256_hex(model_to_json(mf).dump());
  return out;
}

nlohmann::json model_to_json(const ModelFile& model) {
  using nlohmann::json;
  const auto& p = model.params;
  json lfs = json::array();
  for (std::size_t j = 0; j < p.lfs.size(); ++j) {
    lfs.push_back({{"name", j < model.lf_names.size() ? model.lf_names[j] : std::to_string(j)},
                   {"q", p.lfs[j].propensity},
                   {"a", p.lfs[j].accuracy}});
  }
  json edges = json::array();
  for (const auto& e : p.edges) {
    edges.push_back({{"j", e.j},
                     {"k", e.k},
                     {"joint_neg", std::vector<double>(e.joint[0].begin(), e.joint[0].end())},
                     {"joint_pos", std::vector<double>(e.joint[1].begin(), e.joint[1].end())}});
  }
  json scores = json::array();
  for (const auto& s : model.structure.scores) scores.push_back({{"j", s.j}, {"k", s.k}, {"score", s.score}});
  return {{"beta", p.beta},
          {"lfs", lfs},
          {"edges", edges},
          {"structure_scores", scores},
          {"lfset_version", model.lfset_version},
          {"fit", model.fit_metadata.is_null() ? json::object() : model.fit_metadata}};
}

ModelFile model_from_json(const nlohmann::json& doc) {
  ModelFile out;
  try {
    out.params.beta = doc.at("beta").get<double>();
    for (const auto& lf : doc.at("lfs")) {
      out.lf_names.push_back(lf.at("name").get<std::string>());
      out.params.lfs.push_back({lf.at("q").get<double>(), lf.at("a").get<double>()});
    }
    for (const auto& e : doc.at("edges")) {
      EdgeParams ep;
      ep.j = e.at("j").get<std::size_t>();
      ep.k = e.at("k").get<std::size_t>();
      const auto neg = e.at("joint_neg").get<std::vector<double>>();
      const auto pos = e.at("joint_pos").get<std::vector<double>>();
      if (neg.size() != 9 || pos.size() != 9) throw ParseError("edge tables need 9 cells");
      std::copy(neg.begin(), neg.end(), ep.joint[0].begin());
      std::copy(pos.begin(), pos.end(), ep.joint[1].begin());
      out.params.edges.push_back(ep);
      out.structure.edges.emplace_back(ep.j, ep.k);
    }
    for (const auto& s : doc.value("structure_scores", nlohmann::json::array())) {
      out.structure.scores.push_back({s.at("j").get<std::size_t>(), s.at("k").get<std::size_t>(),
                                      s.at("score").get<double>()});
    }
    out.lfset_version = doc.value("lfset_version", std::string{});
    out.fit_metadata = doc.value("fit", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
  out.structure.validate(out.params.lfs.size());
  return out;
}

}  // namespace labelforge
