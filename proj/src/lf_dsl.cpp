#include "labelforge/lf_dsl.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <thread>

namespace labelforge {

namespace {

using nlohmann::json;

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> token_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text)) out.push_back(std::move(t.text));
  return out;
}

RulePtr make(auto node) { return std::make_shared<const Rule>(Rule{std::move(node)}); }

std::size_t get_count(const json& v, const char* what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ParseError(std::string(what) + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

const std::string& get_string(const json& v, const char* what) {
  if (!v.is_string()) throw ParseError(std::string(what) + " must be a string");
  return v.get_ref<const std::string&>();
}

RulePtr parse_rule_at(const json& spec, const std::filesystem::path& base_dir, std::size_t depth) {
  if (depth > kMaxRuleDepth) {
    throw ParseError("rule nesting deeper than " + std::to_string(kMaxRuleDepth));
  }
  if (!spec.is_object() || spec.size() != 1) throw ParseError("a rule must be an object with exactly one key");
  const auto& [key, value] = *spec.items().begin();

  if (key == "contains") {
    const auto& term = get_string(value, "contains");
    auto toks = token_texts(term);
    if (toks.empty()) throw ParseError("contains: term \"" + term + "\" has no alphanumeric tokens");
    return make(rules::Contains{term, std::move(toks)});
  }
  if (key == "prefix_word") {
    auto prefix = lower(get_string(value, "prefix_word"));
    if (prefix.empty()) throw ParseError("prefix_word: empty prefix");
    return make(rules::PrefixWord{std::move(prefix)});
  }
  if (key == "regex") {
    const auto& pattern = get_string(value, "regex");
    try {
      auto re = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript | std::regex::icase);
      return make(rules::Regex{pattern, std::move(re)});
    } catch (const std::regex_error& e) {
      throw ParseError("invalid regex \"" + pattern + "\": " + e.what());
    }
  }
  if (key == "term_list") {
    const auto& path = get_string(value, "term_list");
    std::filesystem::path resolved = path;
    if (resolved.is_relative() && !base_dir.empty()) resolved = base_dir / resolved;
    if (!std::filesystem::exists(resolved)) throw ParseError("term_list file not found: " + resolved.string());
    const auto content = read_file(resolved);
    rules::TermList tl{path, {}, sha256_hex(content)};
    std::string_view rest = content;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      auto toks = token_texts(rest.substr(0, nl));
      if (!toks.empty()) tl.phrases.push_back(std::move(toks));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
    if (tl.phrases.empty()) throw ParseError("term_list file is empty: " + resolved.string());
    return make(std::move(tl));
  }
  if (key == "length_below") return make(rules::LengthBelow{get_count(value, "length_below")});
  if (key == "length_above") return make(rules::LengthAbove{get_count(value, "length_above")});
  if (key == "all" || key == "any") {
    if (!value.is_array() || value.empty()) throw ParseError(key + ": expected a non-empty array of rules");
    std::vector<RulePtr> children;
    for (const auto& child : value) children.push_back(parse_rule_at(child, base_dir, depth + 1));
    if (key == "all") return make(rules::All{std::move(children)});
    return make(rules::Any{std::move(children)});
  }
  if (key == "not") return make(rules::Not{parse_rule_at(value, base_dir, depth + 1)});
  if (key == "in_section") {
    if (!value.is_object() || !value.contains("name") || !value.contains("rule")) {
      throw ParseError("in_section: expected {\"name\":..., \"rule\":...}");
    }
    auto name = upper(get_string(value.at("name"), "in_section.name"));
    return make(rules::InSection{std::move(name), parse_rule_at(value.at("rule"), base_dir, depth + 1)});
  }
  if (key == "negation_guard") {
    if (!value.is_object() || !value.contains("window") || !value.contains("rule")) {
      throw ParseError("negation_guard: expected {\"window\":..., \"rule\":...}");
    }
    rules::NegationGuard g;
    g.window = get_count(value.at("window"), "negation_guard.window");
    g.rule = parse_rule_at(value.at("rule"), base_dir, depth + 1);
    if (value.contains("cues")) {
      if (!value.at("cues").is_array()) throw ParseError("negation_guard.cues must be an array");
      for (const auto& c : value.at("cues")) g.extra_cues.push_back(lower(get_string(c, "negation cue")));
    }
    return make(std::move(g));
  }
  throw ParseError("unknown rule variant \"" + key + "\"");
}

json rule_json(const Rule& rule, bool with_content_hash) {
  return std::visit(
      [&](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, rules::Contains>) {
          return {{"contains", r.term}};
        } else if constexpr (std::is_same_v<T, rules::PrefixWord>) {
          return {{"prefix_word", r.prefix}};
        } else if constexpr (std::is_same_v<T, rules::Regex>) {
          return {{"regex", r.pattern}};
        } else if constexpr (std::is_same_v<T, rules::TermList>) {
          if (with_content_hash) return {{"term_list", {{"path", r.path}, {"sha256", r.content_sha256}}}};
          return {{"term_list", r.path}};
        } else if constexpr (std::is_same_v<T, rules::LengthBelow>) {
          return {{"length_below", r.k}};
        } else if constexpr (std::is_same_v<T, rules::LengthAbove>) {
          return {{"length_above", r.k}};
        } else if constexpr (std::is_same_v<T, rules::All> || std::is_same_v<T, rules::Any>) {
          json arr = json::array();
          for (const auto& c : r.rules) arr.push_back(rule_json(*c, with_content_hash));
          return {{std::is_same_v<T, rules::All> ? "all" : "any", arr}};
        } else if constexpr (std::is_same_v<T, rules::Not>) {
          return {{"not", rule_json(*r.rule, with_content_hash)}};
        } else if constexpr (std::is_same_v<T, rules::InSection>) {
          return {{"in_section", {{"name", r.name}, {"rule", rule_json(*r.rule, with_content_hash)}}}};
        } else {
          json g = {{"window", r.window}, {"rule", rule_json(*r.rule, with_content_hash)}};
          if (!r.extra_cues.empty()) g["cues"] = r.extra_cues;
          return {{"negation_guard", g}};
        }
      },
      rule.node);
}

// ---- evaluation -----------------------------------------------------------

struct Scope {
  std::size_t token_begin = 0;
  std::size_t token_end = 0;
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;
};

/// A rule outcome. `positions` are token indices where positional matches
/// start; `unanchored` marks a match with no position (length, negation...).
struct Match {
  bool matched = false;
  bool unanchored = false;
  std::vector<std::size_t> positions;
};

Match positional(std::vector<std::size_t> positions) {
  Match m;
  m.matched = !positions.empty();
  m.positions = std::move(positions);
  return m;
}

Match unanchored(bool matched) {
  Match m;
  m.matched = matched;
  m.unanchored = matched;
  return m;
}

void merge_positions(std::vector<std::size_t>& into, const std::vector<std::size_t>& from) {
  std::vector<std::size_t> merged;
  std::set_union(into.begin(), into.end(), from.begin(), from.end(), std::back_inserter(merged));
  into = std::move(merged);
}

std::vector<std::size_t> phrase_positions(const std::vector<Token>& tokens, const Scope& scope,
                                          const std::vector<std::string>& phrase) {
  std::vector<std::size_t> out;
  if (phrase.empty() || scope.token_end - scope.token_begin < phrase.size()) return out;
  for (std::size_t p = scope.token_begin; p + phrase.size() <= scope.token_end; ++p) {
    bool ok = true;
    for (std::size_t t = 0; t < phrase.size() && ok; ++t) ok = tokens[p + t].text == phrase[t];
    if (ok) out.push_back(p);
  }
  return out;
}

Scope section_scope(const Document& doc, const Section& s, const Scope& outer) {
  const auto& tokens = doc.tokens();
  const std::size_t start = std::max(s.start, outer.byte_begin);
  const std::size_t end = std::max(start, std::min(s.end, outer.byte_end));
  auto by_begin = [](const Token& t, std::size_t pos) { return t.begin < pos; };
  const auto tb = static_cast<std::size_t>(std::lower_bound(tokens.begin(), tokens.end(), start, by_begin) - tokens.begin());
  const auto te = static_cast<std::size_t>(std::lower_bound(tokens.begin(), tokens.end(), end, by_begin) - tokens.begin());
  return {tb, std::max(tb, te), start, end};
}

Match eval(const Rule& rule, const Document& doc, const Scope& scope, ApplyWarnings* warnings) {
  const auto& tokens = doc.tokens();
  return std::visit(
      [&](const auto& r) -> Match {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, rules::Contains>) {
          return positional(phrase_positions(tokens, scope, r.tokens));
        } else if constexpr (std::is_same_v<T, rules::PrefixWord>) {
          std::vector<std::size_t> pos;
          for (std::size_t p = scope.token_begin; p < scope.token_end; ++p) {
            if (tokens[p].text.starts_with(r.prefix)) pos.push_back(p);
          }
          return positional(std::move(pos));
        } else if constexpr (std::is_same_v<T, rules::Regex>) {
          const char* base = doc.text().data();
          std::vector<std::size_t> pos;
          for (std::cregex_iterator it(base + scope.byte_begin, base + scope.byte_end, *r.compiled), end; it != end;
               ++it) {
            const std::size_t byte = scope.byte_begin + static_cast<std::size_t>(it->position(0));
            // Token that contains or follows the match start.
            auto tok = std::lower_bound(tokens.begin() + static_cast<std::ptrdiff_t>(scope.token_begin),
                                        tokens.begin() + static_cast<std::ptrdiff_t>(scope.token_end), byte,
                                        [](const Token& t, std::size_t b) { return t.end <= b; });
            pos.push_back(static_cast<std::size_t>(tok - tokens.begin()));
            if (it->length(0) == 0) break;
          }
          std::sort(pos.begin(), pos.end());
          pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
          return positional(std::move(pos));
        } else if constexpr (std::is_same_v<T, rules::TermList>) {
          std::vector<std::size_t> pos;
          for (const auto& phrase : r.phrases) merge_positions(pos, phrase_positions(tokens, scope, phrase));
          return positional(std::move(pos));
        } else if constexpr (std::is_same_v<T, rules::LengthBelow>) {
          return unanchored(scope.token_end - scope.token_begin < r.k);
        } else if constexpr (std::is_same_v<T, rules::LengthAbove>) {
          return unanchored(scope.token_end - scope.token_begin > r.k);
        } else if constexpr (std::is_same_v<T, rules::All>) {
          Match out;
          out.matched = true;
          for (const auto& c : r.rules) {
            auto sub = eval(*c, doc, scope, warnings);
            if (!sub.matched) return Match{};
            merge_positions(out.positions, sub.positions);
          }
          out.unanchored = out.positions.empty();
          return out;
        } else if constexpr (std::is_same_v<T, rules::Any>) {
          Match out;
          for (const auto& c : r.rules) {
            auto sub = eval(*c, doc, scope, warnings);
            if (!sub.matched) continue;
            out.matched = true;
            out.unanchored = out.unanchored || sub.unanchored;
            merge_positions(out.positions, sub.positions);
          }
          return out;
        } else if constexpr (std::is_same_v<T, rules::Not>) {
          return unanchored(!eval(*r.rule, doc, scope, warnings).matched);
        } else if constexpr (std::is_same_v<T, rules::InSection>) {
          Match out;
          bool found = false;
          for (const auto& s : doc.sections()) {
            if (s.name != r.name) continue;
            found = true;
            auto sub = eval(*r.rule, doc, section_scope(doc, s, scope), warnings);
            if (!sub.matched) continue;
            out.matched = true;
            out.unanchored = out.unanchored || sub.unanchored;
            merge_positions(out.positions, sub.positions);
          }
          if (!found && warnings) warnings->missing_section.fetch_add(1, std::memory_order_relaxed);
          return out;
        } else {
          auto inner = eval(*r.rule, doc, scope, warnings);
          if (!inner.matched) return Match{};
          auto is_cue = [&](const std::string& tok) {
            return std::find(kDefaultNegationCues.begin(), kDefaultNegationCues.end(), tok) !=
                       kDefaultNegationCues.end() ||
                   std::find(r.extra_cues.begin(), r.extra_cues.end(), tok) != r.extra_cues.end();
          };
          Match out;
          out.unanchored = inner.unanchored;
          for (std::size_t p : inner.positions) {
            const std::size_t from = p >= scope.token_begin + r.window ? p - r.window : scope.token_begin;
            bool negated = false;
            for (std::size_t t = from; t < p && !negated; ++t) negated = is_cue(tokens[t].text);
            if (!negated) out.positions.push_back(p);
          }
          out.matched = out.unanchored || !out.positions.empty();
          return out;
        }
      },
      rule.node);
}

}  // namespace

std::vector<std::string> LFSet::names() const {
  std::vector<std::string> out;
  for (const auto& lf : lfs) out.push_back(lf.name);
  return out;
}

RulePtr parse_rule(const nlohmann::json& spec, const std::filesystem::path& base_dir) {
  return parse_rule_at(spec, base_dir, 1);
}

LFSet parse_lf_file(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("LF file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("lfs") || !doc.at("lfs").is_array()) {
    throw ParseError("LF file must be an object with an \"lfs\" array");
  }
  const auto& arr = doc.at("lfs");
  if (arr.empty()) throw ParseError("at least one LF required");

  LFSet set;
  std::set<std::string> names;
  json canonical = json::array();
  for (std::size_t idx = 0; idx < arr.size(); ++idx) {
    const auto& item = arr[idx];
    if (!item.is_object() || !item.contains("name") || !item.at("name").is_string()) {
      throw ParseError("LF #" + std::to_string(idx) + ": missing string \"name\"");
    }
    LFDefinition lf;
    lf.name = item.at("name").get<std::string>();
    const auto ctx = "LF \"" + lf.name + "\": ";
    if (lf.name.empty() || lf.name.find_first_of(",\n\r\"") != std::string::npos) {
      throw ParseError(ctx + "name must be non-empty and free of commas, quotes and newlines");
    }
    if (!names.insert(lf.name).second) throw ParseError("duplicate LF name \"" + lf.name + "\"");
    if (!item.contains("emit") || !item.at("emit").is_number_integer() ||
        (item.at("emit").get<int>() != 1 && item.at("emit").get<int>() != -1)) {
      throw ParseError(ctx + "emit must be 1 or -1");
    }
    lf.emit = item.at("emit").get<int>();
    if (!item.contains("rule")) throw ParseError(ctx + "missing \"rule\"");
    try {
      lf.rule = parse_rule(item.at("rule"), base_dir);
    } catch (const ParseError& e) {
      throw ParseError(ctx + e.what());
    }
    canonical.push_back({{"name", lf.name}, {"emit", lf.emit}, {"rule", rule_json(*lf.rule, true)}});
    set.lfs.push_back(std::move(lf));
  }
  set.version = sha256_hex(canonical.dump());
  return set;
}

LFSet load_lf_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFoundError("LF file not found: " + path.string());
  return parse_lf_file(read_file(path), path.parent_path());
}

nlohmann::json rule_to_json(const Rule& rule) { return rule_json(rule, false); }

nlohmann::json lfset_to_json(const LFSet& lfset) {
  json arr = json::array();
  for (const auto& lf : lfset.lfs) {
    arr.push_back({{"name", lf.name}, {"emit", lf.emit}, {"rule", rule_to_json(*lf.rule)}});
  }
  return {{"lfs", arr}};
}

bool rule_matches(const Rule& rule, const Document& doc, ApplyWarnings* warnings) {
  const Scope whole{0, doc.token_count(), 0, doc.text().size()};
  return eval(rule, doc, whole, warnings).matched;
}

Vote apply_lf(const LFDefinition& lf, const Document& doc, ApplyWarnings* warnings) {
  return rule_matches(*lf.rule, doc, warnings) ? static_cast<Vote>(lf.emit) : Vote{0};
}

LabelMatrix apply_all(const LFSet& lfset, const Corpus& corpus, const ApplyOptions& options,
                      ApplyWarnings* warnings) {
  if (corpus.empty()) throw Error("apply_all: corpus is empty");
  const std::size_t n = corpus.size();
  std::vector<std::vector<VoteEntry>> rows(n);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < lfset.lfs.size(); ++j) {
        const Vote v = apply_lf(lfset.lfs[j], corpus[i], warnings);
        if (v != 0) rows[i].push_back({static_cast<std::uint32_t>(j), v});
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, n);
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
  }
  return LabelMatrix(corpus.ids(), lfset.names(), std::move(rows), lfset.version);
}

}  // namespace labelforge
