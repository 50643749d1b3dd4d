#include "labelforge/synth.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace labelforge {

namespace {

constexpr std::uint64_t kDataStream = 0x9e3779b97f4a7c15ULL;

Vote draw_vote(Rng& rng, int y, double q, double a) {
  if (!rng.bernoulli(q)) return 0;
  return static_cast<Vote>(rng.bernoulli(a) ? y : -y);
}

std::string row_id(std::size_t i) { return "r" + std::to_string(i); }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[rng.below(pool.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

const std::vector<std::string> kNormalFindings = {
    "The lungs are clear.",
    "Heart size is normal.",
    "The cardiomediastinal silhouette is within normal limits.",
    "Mediastinal contours are unremarkable.",
    "Bony structures are intact.",
    "Pulmonary vasculature is normal.",
    "The trachea is midline.",
    "Both hemidiaphragms are well defined.",
    "Soft tissues are unremarkable.",
    "Lung volumes are adequate.",
};

const std::vector<std::string> kNormalImpressions = {
    "Normal study.",
    "Unremarkable examination.",
    "Normal chest radiograph.",
    "Stable appearance compared with prior.",
};

const std::vector<std::string> kDetailSentences = {
    "Support devices are in standard position.",
    "Comparison is made with the prior examination.",
    "Degenerative changes are seen in the thoracic spine.",
    "There is mild elevation of the right hemidiaphragm.",
    "Surgical clips project over the upper abdomen.",
    "Scattered calcified granulomas are noted.",
};

const std::vector<std::string> kSizes = {"small", "moderate", "large", "new", "persistent"};
const std::vector<std::string> kSides = {"right", "left", "bilateral", "basilar", "apical"};

}  // namespace

void SynthSpec::validate() const {
  if (m < 1 || n < 1) throw Error("synth: m and n must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw Error("synth: beta must lie in (0, 1)");
  if (accuracies) {
    if (accuracies->size() != m) throw Error("synth: accuracies must have m entries");
    for (double a : *accuracies) {
      if (!(a >= 0.0 && a <= 1.0)) throw Error("synth: accuracies must lie in [0, 1]");
    }
  } else if (!(0.5 < a_lo && a_lo <= a_hi && a_hi < 1.0)) {
    throw Error("synth: need 0.5 < a_lo <= a_hi < 1");
  }
  if (propensities) {
    if (propensities->size() != m) throw Error("synth: propensities must have m entries");
    for (double q : *propensities) {
      if (!(q >= 0.0 && q <= 1.0)) throw Error("synth: propensities must lie in [0, 1]");
    }
  } else if (!(0.0 < q_lo && q_lo <= q_hi && q_hi <= 1.0)) {
    throw Error("synth: need 0 < q_lo <= q_hi <= 1");
  }
  std::vector<bool> used(m, false);
  for (const auto& e : edges) {
    if (e.source >= m || e.target >= m || e.source == e.target) throw Error("synth: bad planted edge");
    if (used[e.source] || used[e.target]) throw Error("synth: planted edges must form a matching");
    if (!(e.copy_prob >= 0.0 && e.copy_prob <= 1.0)) throw Error("synth: copy_prob must lie in [0, 1]");
    used[e.source] = used[e.target] = true;
  }
}

SynthDataset sample_dataset(const SynthSpec& spec) {
  spec.validate();
  // Each LF draws votes from its own (q, a); a copying target's marginals
  // are reported in `truth` instead, so every entry there is a true value.
  Rng param_rng(spec.seed);
  std::vector<LFParams> own(spec.m);
  for (std::size_t j = 0; j < spec.m; ++j) {
    const double a = param_rng.uniform(spec.a_lo, spec.a_hi);
    const double q = param_rng.uniform(spec.q_lo, spec.q_hi);
    own[j].accuracy = spec.accuracies ? (*spec.accuracies)[j] : a;
    own[j].propensity = spec.propensities ? (*spec.propensities)[j] : q;
  }

  SynthDataset out;
  GenerativeParams truth;
  truth.beta = spec.beta;
  truth.lfs = own;
  for (const auto& pe : spec.edges) {
    // Stored with j < k; the copy relation is oriented by source/target.
    EdgeParams ep;
    ep.j = std::min(pe.source, pe.target);
    ep.k = std::max(pe.source, pe.target);
    const auto& src = own[pe.source];
    const auto& tgt = own[pe.target];
    for (std::size_t s = 0; s < 2; ++s) {
      const int y = s == 1 ? 1 : -1;
      auto cond = [y](const LFParams& lf, int v) {
        if (v == 0) return 1.0 - lf.propensity;
        return lf.propensity * (v == y ? lf.accuracy : 1.0 - lf.accuracy);
      };
      for (int vs = -1; vs <= 1; ++vs) {
        for (int vt = -1; vt <= 1; ++vt) {
          const double copied = vt == vs ? 1.0 : 0.0;
          const double pr = cond(src, vs) * (pe.copy_prob * copied + (1.0 - pe.copy_prob) * cond(tgt, vt));
          const Vote vj = static_cast<Vote>(pe.source < pe.target ? vs : vt);
          const Vote vk = static_cast<Vote>(pe.source < pe.target ? vt : vs);
          ep.joint[s][joint_cell(vj, vk)] = pr;
        }
      }
    }
    truth.edges.push_back(ep);
    out.structure.edges.emplace_back(ep.j, ep.k);

    const double c = pe.copy_prob;
    const double q = c * src.propensity + (1.0 - c) * tgt.propensity;
    const double correct = c * src.propensity * src.accuracy + (1.0 - c) * tgt.propensity * tgt.accuracy;
    truth.lfs[pe.target].propensity = q;
    truth.lfs[pe.target].accuracy = q > 0.0 ? correct / q : 0.5;
  }

  Rng rng(spec.data_seed.value_or(spec.seed ^ kDataStream));
  std::vector<std::string> ids(spec.n);
  std::vector<Vote> dense(spec.n * spec.m, 0);
  out.y_true.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    ids[i] = row_id(i);
    const int y = rng.bernoulli(spec.beta) ? 1 : -1;
    out.y_true[i] = y;
    Vote* row = dense.data() + i * spec.m;
    for (std::size_t j = 0; j < spec.m; ++j) row[j] = draw_vote(rng, y, own[j].propensity, own[j].accuracy);
    for (const auto& pe : spec.edges) {
      if (rng.bernoulli(pe.copy_prob)) row[pe.target] = row[pe.source];
    }
  }
  std::vector<std::string> names(spec.m);
  for (std::size_t j = 0; j < spec.m; ++j) names[j] = "lf" + std::to_string(j);
  out.matrix = LabelMatrix::from_dense(std::move(ids), std::move(names), dense, "synthetic");
  out.truth = std::move(truth);
  return out;
}

const std::vector<std::string>& synthetic_report_headers() {
  static const std::vector<std::string> headers = {"FINDINGS:", "IMPRESSION:"};
  return headers;
}

const std::vector<std::string>& abnormality_lexicon() {
  static const std::vector<std::string> lexicon = {
      "pneumothorax", "pneumonia",     "pneumomediastinum", "pleural effusion", "consolidation",
      "hemorrhage",   "pulmonary edema", "cardiomegaly",    "atelectasis",      "fracture",
  };
  return lexicon;
}

TextCorpus gen_text_corpus(std::size_t n, std::uint64_t seed, const TextCorpusOptions& options) {
  if (n < 1) throw Error("gen_text_corpus: n must be >= 1");
  Rng rng(seed);
  const auto& lexicon = abnormality_lexicon();
  TextCorpus out;
  out.headers = synthetic_report_headers();
  std::vector<Document> docs;
  docs.reserve(n);
  out.y_true.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = rng.bernoulli(options.positive_rate);
    std::vector<std::string> findings, impression;
    std::string preamble = "EXAM: Chest radiograph, " + std::string(rng.bernoulli(0.5) ? "PA and lateral" : "portable AP") + " view.";

    if (positive) {
      const bool silent = rng.bernoulli(options.silent_positive_rate);
      const std::size_t n_normal = 2 + rng.below(3);
      for (std::size_t s = 0; s < n_normal; ++s) findings.push_back(pick(rng, kNormalFindings));
      const std::size_t n_detail = 1 + rng.below(3);
      for (std::size_t s = 0; s < n_detail; ++s) findings.push_back(pick(rng, kDetailSentences));
      if (silent) {
        findings.push_back("There is a subtle opacity of uncertain significance.");
        impression.push_back("Clinical correlation is recommended.");
      } else {
        const auto& term = pick(rng, lexicon);
        findings.insert(findings.begin() + static_cast<std::ptrdiff_t>(rng.below(findings.size() + 1)),
                        "There is a " + pick(rng, kSizes) + " " + pick(rng, kSides) + " " + term + ".");
        if (rng.bernoulli(0.4)) {
          const auto& second = pick(rng, lexicon);
          findings.push_back("Findings may also represent " + second + ".");
        }
        impression.push_back(rng.bernoulli(0.8) ? capitalize(term) + " as described above."
                                                : "Abnormal study, see findings.");
        if (rng.bernoulli(0.5)) impression.push_back("Recommend follow up imaging.");
      }
    } else {
      const std::size_t n_normal = 1 + rng.below(3);
      for (std::size_t s = 0; s < n_normal; ++s) findings.push_back(pick(rng, kNormalFindings));
      if (rng.bernoulli(0.2)) findings.push_back(pick(rng, kDetailSentences));
      if (rng.bernoulli(options.negated_fraction)) {
        const auto& term = pick(rng, lexicon);
        findings.push_back(rng.bernoulli(0.5) ? "No " + term + "." : "There is no evidence of " + term + ".");
      }
      if (rng.bernoulli(options.false_mention_rate)) {
        findings.push_back("Questionable " + pick(rng, lexicon) + " is likely artifact.");
      }
      impression.push_back(pick(rng, kNormalImpressions));
      if (rng.bernoulli(0.5)) impression.push_back("No acute cardiopulmonary process.");
    }

    std::string text = preamble + "\nFINDINGS:";
    for (const auto& s : findings) text += " " + s;
    text += "\nIMPRESSION:";
    for (const auto& s : impression) text += " " + s;
    text += "\n";
    docs.push_back(segment_sections(Document(row_id(i), std::move(text)), out.headers));
    out.y_true.push_back(positive ? 1 : -1);
  }
  out.corpus = Corpus(std::move(docs), "synthetic");

  // Dev subset: a seeded partial shuffle, reported in corpus order.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t dev_n = std::min(options.dev_size, n);
  for (std::size_t t = 0; t < dev_n; ++t) {
    std::swap(idx[t], idx[t + rng.below(n - t)]);
  }
  idx.resize(dev_n);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) out.dev.push_back({out.corpus[i].id(), out.y_true[i]});
  return out;
}

FeatureMatrix gen_features(const std::vector<std::string>& ids, const std::vector<int>& y_true, std::size_t d,
                           double sigma, std::uint64_t seed, double mu) {
  if (d < 1 || !(sigma > 0.0)) throw Error("gen_features: need d >= 1 and sigma > 0");
  if (ids.size() != y_true.size()) throw Error("gen_features: ids and labels differ in length");
  Rng rng(seed);
  FeatureMatrix x;
  x.ids = ids;
  x.d = d;
  x.values.reserve(ids.size() * d);
  for (int y : y_true) {
    for (std::size_t k = 0; k < d; ++k) x.values.push_back(static_cast<double>(y) * mu + sigma * rng.normal());
  }
  return x;
}

double gaussian_bayes_auc(std::size_t d, double sigma, double mu) {
  // The summed score has means +-mu*d and variance sigma^2 d per class.
  return normal_cdf(mu * std::sqrt(static_cast<double>(d)) * 2.0 / (sigma * std::sqrt(2.0)));
}

}  // namespace labelforge
