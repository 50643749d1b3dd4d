#pragma once

#include "labelforge/corpus.hpp"
#include "labelforge/label_matrix.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <memory>
#include <regex>
#include <string>
#include <variant>
#include <vector>

namespace labelforge {

inline constexpr std::size_t kMaxRuleDepth = 16;

/// Negation cues checked by every negation guard.
inline const std::vector<std::string> kDefaultNegationCues = {"no", "not", "without", "negative"};

struct Rule;
using RulePtr = std::shared_ptr<const Rule>;

namespace rules {

/// Contiguous token phrase, matched on tokenized text.
struct Contains {
  std::string term;
  std::vector<std::string> tokens;
};
/// Any token starting with `prefix` (lowercased).
struct PrefixWord {
  std::string prefix;
};
/// Case-insensitive ECMAScript search over the raw text.
struct Regex {
  std::string pattern;
  std::shared_ptr<const std::regex> compiled;
};
/// Any phrase of a newline-delimited ontology file.
struct TermList {
  std::string path;
  std::vector<std::vector<std::string>> phrases;
  std::string content_sha256;
};
struct LengthBelow {
  std::size_t k = 0;
};
struct LengthAbove {
  std::size_t k = 0;
};
struct All {
  std::vector<RulePtr> rules;
};
struct Any {
  std::vector<RulePtr> rules;
};
struct Not {
  RulePtr rule;
};
struct InSection {
  std::string name;
  RulePtr rule;
};
/// Drops inner matches preceded by a cue within `window` tokens.
struct NegationGuard {
  std::size_t window = 0;
  RulePtr rule;
  std::vector<std::string> extra_cues;
};

}  // namespace rules

struct Rule {
  std::variant<rules::Contains, rules::PrefixWord, rules::Regex, rules::TermList, rules::LengthBelow,
               rules::LengthAbove, rules::All, rules::Any, rules::Not, rules::InSection, rules::NegationGuard>
      node;
};

struct LFDefinition {
  std::string name;
  RulePtr rule;
  int emit = 1;  ///< label emitted on a match; abstain otherwise
};

/// Ordered LFs; the order is the label-matrix column order.
struct LFSet {
  std::vector<LFDefinition> lfs;
  std::string version;  ///< sha256 over the canonical content

  std::size_t size() const noexcept { return lfs.size(); }
  std::vector<std::string> names() const;
};

/// Parses one rule object. Relative term-list paths resolve against `base_dir`.
RulePtr parse_rule(const nlohmann::json& spec, const std::filesystem::path& base_dir = {});

/// Parses the JSON LF file, `{"lfs":[{"name":..,"emit":..,"rule":..}, ...]}`.
LFSet parse_lf_file(std::string_view text, const std::filesystem::path& base_dir = {});
LFSet load_lf_file(const std::filesystem::path& path);

/// Rule in file syntax.
nlohmann::json rule_to_json(const Rule& rule);
nlohmann::json lfset_to_json(const LFSet& lfset);

/// Counters collected while applying a set of LFs.
struct ApplyWarnings {
  std::atomic<std::size_t> missing_section{0};
};

/// Whether `rule` fires anywhere in `doc`.
bool rule_matches(const Rule& rule, const Document& doc, ApplyWarnings* warnings = nullptr);

/// `lf.emit` if the rule fires, else 0.
Vote apply_lf(const LFDefinition& lf, const Document& doc, ApplyWarnings* warnings = nullptr);

struct ApplyOptions {
  std::size_t workers = 1;
};

/// n x m label matrix, rows in corpus order and columns in LF order.
LabelMatrix apply_all(const LFSet& lfset, const Corpus& corpus, const ApplyOptions& options = {},
                      ApplyWarnings* warnings = nullptr);

}  // namespace labelforge
