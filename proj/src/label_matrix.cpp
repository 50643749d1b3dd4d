#include "labelforge/label_matrix.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

namespace labelforge {

namespace {

int vote_index(Vote v) { return v + 1; }

}  // namespace

LabelMatrix::LabelMatrix(std::vector<std::string> row_ids, std::vector<std::string> col_names,
                         std::vector<std::vector<VoteEntry>> rows, std::string lfset_version)
    : row_ids_(std::move(row_ids)), col_names_(std::move(col_names)), lfset_version_(std::move(lfset_version)) {
  if (rows.size() != row_ids_.size()) throw Error("label matrix: row count does not match row ids");
  offsets_.reserve(rows.size() + 1);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end(), [](const VoteEntry& a, const VoteEntry& b) { return a.col < b.col; });
    for (std::size_t t = 0; t < r.size(); ++t) {
      const auto& e = r[t];
      if (e.col >= col_names_.size()) throw Error("label matrix: column index out of bounds");
      if (t > 0 && r[t - 1].col == e.col) throw Error("label matrix: duplicate entry in a row");
      if (e.vote == 0) continue;
      if (e.vote != 1 && e.vote != -1) throw Error("label matrix: vote outside {-1, 0, +1}");
      entries_.push_back(e);
    }
    offsets_.push_back(entries_.size());
  }
}

LabelMatrix LabelMatrix::from_dense(std::vector<std::string> row_ids, std::vector<std::string> col_names,
                                    std::span<const Vote> dense, std::string lfset_version) {
  const std::size_t n = row_ids.size();
  const std::size_t m = col_names.size();
  if (dense.size() != n * m) throw Error("label matrix: dense size mismatch");
  std::vector<std::vector<VoteEntry>> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Vote v = dense[i * m + j];
      if (v != 0) rows[i].push_back({static_cast<std::uint32_t>(j), v});
    }
  }
  return LabelMatrix(std::move(row_ids), std::move(col_names), std::move(rows), std::move(lfset_version));
}

Vote LabelMatrix::at(std::size_t i, std::size_t j) const {
  const auto r = row(i);
  auto it = std::lower_bound(r.begin(), r.end(), j, [](const VoteEntry& e, std::size_t c) { return e.col < c; });
  return (it != r.end() && it->col == j) ? it->vote : Vote{0};
}

std::vector<Vote> LabelMatrix::dense_row(std::size_t i) const {
  std::vector<Vote> out(m(), 0);
  for (const auto& e : row(i)) out[e.col] = e.vote;
  return out;
}

std::vector<Vote> LabelMatrix::to_dense() const {
  std::vector<Vote> out(n() * m(), 0);
  for (std::size_t i = 0; i < n(); ++i) {
    for (const auto& e : row(i)) out[i * m() + e.col] = e.vote;
  }
  return out;
}

LabelMatrix LabelMatrix::permute_columns(std::span<const std::size_t> order) const {
  if (order.size() != m()) throw Error("permute_columns: order has wrong length");
  std::vector<std::uint32_t> new_index(m(), 0);
  std::vector<std::string> names(m());
  for (std::size_t c = 0; c < m(); ++c) {
    new_index.at(order[c]) = static_cast<std::uint32_t>(c);
    names[c] = col_names_[order[c]];
  }
  std::vector<std::vector<VoteEntry>> rows(n());
  for (std::size_t i = 0; i < n(); ++i) {
    for (const auto& e : row(i)) rows[i].push_back({new_index[e.col], e.vote});
  }
  return LabelMatrix(row_ids_, std::move(names), std::move(rows), lfset_version_);
}

LabelMatrix LabelMatrix::negated() const {
  LabelMatrix out = *this;
  for (auto& e : out.entries_) e.vote = static_cast<Vote>(-e.vote);
  return out;
}

std::string matrix_to_csv(const LabelMatrix& matrix) {
  std::string out = "row_id,lf_name,vote\n";
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    for (const auto& e : matrix.row(i)) {
      out += matrix.row_ids()[i];
      out += ',';
      out += matrix.col_names()[e.col];
      out += ',';
      out += std::to_string(e.vote);
      out += '\n';
    }
  }
  return out;
}

nlohmann::json matrix_sidecar(const LabelMatrix& matrix) {
  return {{"n", matrix.n()},
          {"m", matrix.m()},
          {"nnz", matrix.nnz()},
          {"row_ids", matrix.row_ids()},
          {"col_names", matrix.col_names()},
          {"lfset_version", matrix.lfset_version()}};
}

LabelMatrix matrix_from_csv(std::string_view csv, const nlohmann::json& sidecar) {
  auto row_ids = sidecar.at("row_ids").get<std::vector<std::string>>();
  auto col_names = sidecar.at("col_names").get<std::vector<std::string>>();
  if (row_ids.size() != sidecar.at("n").get<std::size_t>() || col_names.size() != sidecar.at("m").get<std::size_t>()) {
    throw ParseError("matrix sidecar: n/m disagree with the id lists");
  }
  std::unordered_map<std::string, std::size_t> row_index, col_index;
  for (std::size_t i = 0; i < row_ids.size(); ++i) row_index.emplace(row_ids[i], i);
  for (std::size_t j = 0; j < col_names.size(); ++j) col_index.emplace(col_names[j], j);

  std::vector<std::vector<VoteEntry>> rows(row_ids.size());
  std::size_t line_no = 0;
  while (!csv.empty()) {
    ++line_no;
    const auto nl = csv.find('\n');
    std::string_view line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "row_id,lf_name,vote") throw ParseError("matrix csv: bad header");
      continue;
    }
    const auto c2 = line.rfind(',');
    const auto c1 = c2 == std::string_view::npos ? c2 : line.rfind(',', c2 - 1);
    if (c1 == std::string_view::npos) throw ParseError("matrix csv line " + std::to_string(line_no) + ": bad row");
    const std::string rid(line.substr(0, c1));
    const std::string lf(line.substr(c1 + 1, c2 - c1 - 1));
    const auto v = line.substr(c2 + 1);
    auto ri = row_index.find(rid);
    auto ci = col_index.find(lf);
    if (ri == row_index.end() || ci == col_index.end() || (v != "1" && v != "-1")) {
      throw ParseError("matrix csv line " + std::to_string(line_no) + ": bad row");
    }
    rows[ri->second].push_back({static_cast<std::uint32_t>(ci->second), static_cast<Vote>(v == "1" ? 1 : -1)});
  }
  return LabelMatrix(std::move(row_ids), std::move(col_names), std::move(rows),
                     sidecar.value("lfset_version", std::string{}));
}

LFStats compute_stats(const LabelMatrix& matrix, const std::vector<DevLabel>& dev) {
  const std::size_t n = matrix.n();
  const std::size_t m = matrix.m();
  LFStats s;
  s.n = n;
  s.m = m;
  s.coverage.assign(m, 0.0);
  s.dev_accuracy.assign(m, {});
  s.overlap.assign(m, std::vector<double>(m, 0.0));
  s.conflict.assign(m, std::vector<double>(m, 0.0));

  std::vector<std::size_t> votes(m, 0);
  std::vector<std::array<bool, 2>> seen(m, {false, false});
  std::vector<std::vector<std::size_t>> both(m, std::vector<std::size_t>(m, 0));
  std::vector<std::vector<std::size_t>> disagree(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = matrix.row(i);
    for (std::size_t a = 0; a < r.size(); ++a) {
      ++votes[r[a].col];
      seen[r[a].col][r[a].vote > 0] = true;
      for (std::size_t b = 0; b < r.size(); ++b) {
        ++both[r[a].col][r[b].col];
        if (r[a].vote != r[b].vote) ++disagree[r[a].col][r[b].col];
      }
    }
  }

  std::unordered_map<std::string, std::size_t> row_index;
  row_index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) row_index.emplace(matrix.row_ids()[i], i);
  for (const auto& d : dev) {
    auto it = row_index.find(d.doc_id);
    if (it == row_index.end()) continue;
    for (const auto& e : matrix.row(it->second)) {
      ++s.dev_accuracy[e.col].count;
      if (e.vote == d.y) ++s.dev_accuracy[e.col].correct;
    }
  }

  const double denom = n == 0 ? 1.0 : static_cast<double>(n);
  s.polarity.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    s.coverage[j] = static_cast<double>(votes[j]) / denom;
    if (seen[j][0]) s.polarity[j].push_back(-1);
    if (seen[j][1]) s.polarity[j].push_back(1);
    auto& da = s.dev_accuracy[j];
    if (da.count > 0) da.value = static_cast<double>(da.correct) / static_cast<double>(da.count);
    for (std::size_t k = 0; k < m; ++k) {
      s.overlap[j][k] = static_cast<double>(both[j][k]) / denom;
      s.conflict[j][k] = static_cast<double>(disagree[j][k]) / denom;
    }
  }
  return s;
}

nlohmann::json stats_to_json(const LFStats& stats, const LabelMatrix& matrix) {
  nlohmann::json lfs = nlohmann::json::array();
  for (std::size_t j = 0; j < stats.m; ++j) {
    const auto& da = stats.dev_accuracy[j];
    lfs.push_back({{"name", matrix.col_names()[j]},
                   {"coverage", stats.coverage[j]},
                   {"polarity", stats.polarity[j]},
                   {"dev_accuracy", da.value ? nlohmann::json(*da.value) : nlohmann::json(nullptr)},
                   {"dev_count", da.count}});
  }
  return {{"n", stats.n},
          {"m", stats.m},
          {"lfset_version", matrix.lfset_version()},
          {"lfs", lfs},
          {"overlap", stats.overlap},
          {"conflict", stats.conflict}};
}

IndependenceTest pairwise_independence_test(const LabelMatrix& matrix) {
  const std::size_t n = matrix.n();
  const std::size_t m = matrix.m();
  if (n < 2) throw Error("independence test requires at least 2 rows");
  IndependenceTest out;
  out.p_values.assign(m, std::vector<std::optional<double>>(m, std::nullopt));
  out.low_expected.assign(m, std::vector<bool>(m, false));

  const auto dense = matrix.to_dense();
  for (std::size_t j = 0; j < m; ++j) {
    out.p_values[j][j] = 0.0;
    for (std::size_t k = j + 1; k < m; ++k) {
      std::array<std::array<double, 3>, 3> table{};
      for (std::size_t i = 0; i < n; ++i) {
        table[vote_index(dense[i * m + j])][vote_index(dense[i * m + k])] += 1.0;
      }
      std::array<double, 3> row_sum{}, col_sum{};
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          row_sum[a] += table[a][b];
          col_sum[b] += table[a][b];
        }
      }
      std::vector<int> rows_kept, cols_kept;
      for (int a = 0; a < 3; ++a) {
        if (row_sum[a] > 0) rows_kept.push_back(a);
        if (col_sum[a] > 0) cols_kept.push_back(a);
      }
      if (rows_kept.size() < 2 || cols_kept.size() < 2) continue;  // a constant LF: undefined
      double stat = 0.0;
      bool low = false;
      for (int a : rows_kept) {
        for (int b : cols_kept) {
          const double expected = row_sum[a] * col_sum[b] / static_cast<double>(n);
          if (expected < 5.0) low = true;
          const double diff = table[a][b] - expected;
          stat += diff * diff / expected;
        }
      }
      const double df = static_cast<double>((rows_kept.size() - 1) * (cols_kept.size() - 1));
      const double p = chi_square_sf(stat, df);
      out.p_values[j][k] = out.p_values[k][j] = p;
      out.low_expected[j][k] = out.low_expected[k][j] = low;
    }
  }
  return out;
}

std::vector<DependentPair> dependent_pairs(const IndependenceTest& test, double alpha) {
  const std::size_t m = test.p_values.size();
  std::vector<DependentPair> out;
  if (m < 2) return out;
  const double threshold = alpha / (static_cast<double>(m) * static_cast<double>(m - 1) / 2.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = j + 1; k < m; ++k) {
      const auto& p = test.p_values[j][k];
      if (p && *p < threshold) out.push_back({j, k, *p, test.low_expected[j][k]});
    }
  }
  return out;
}

std::vector<std::string> ProbLabels::excluded_ids() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (r.excluded) out.push_back(r.doc_id);
  }
  return out;
}

std::vector<double> ProbLabels::probabilities() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.p);
  return out;
}

std::string prob_labels_to_jsonl(const ProbLabels& labels) {
  std::string out;
  for (const auto& r : labels.rows) {
    nlohmann::json obj = {{"doc_id", r.doc_id}, {"p", r.p}, {"excluded", r.excluded}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

ProbLabels prob_labels_from_jsonl(std::string_view content) {
  ProbLabels out;
  std::size_t line_no = 0;
  while (!content.empty()) {
    ++line_no;
    const auto nl = content.find('\n');
    const auto line = content.substr(0, nl);
    content = nl == std::string_view::npos ? std::string_view{} : content.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      ProbLabel r{obj.at("doc_id").get<std::string>(), obj.at("p").get<double>(), obj.value("excluded", false)};
      if (!(r.p >= 0.0 && r.p <= 1.0)) throw ParseError("p outside [0, 1]");
      out.rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError("labels line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ProbLabels majority_vote(const LabelMatrix& matrix, double tie_break) {
  if (!(tie_break >= 0.0 && tie_break <= 1.0)) throw Error("majority_vote: tie_break must lie in [0, 1]");
  ProbLabels out;
  out.model_version = "majority_vote";
  out.rows.reserve(matrix.n());
  for (std::size_t i = 0; i < matrix.n(); ++i) {
    int sum = 0;
    for (const auto& e : matrix.row(i)) sum += e.vote;
    const double p = sum > 0 ? 1.0 : (sum < 0 ? 0.0 : tie_break);
    out.rows.push_back({matrix.row_ids()[i], p, false});
  }
  return out;
}

}  // namespace labelforge
