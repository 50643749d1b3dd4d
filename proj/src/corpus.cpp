#include "labelforge/corpus.hpp"

#include "labelforge/error.hpp"
#include "labelforge/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>

namespace labelforge {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename F>
void for_each_line(std::string_view content, F&& f) {
  std::size_t line_no = 0;
  while (!content.empty()) {
    ++line_no;
    const auto nl = content.find('\n');
    f(line_no, content.substr(0, nl));
    if (nl == std::string_view::npos) break;
    content.remove_prefix(nl + 1);
  }
}

std::string section_name(std::string_view header) {
  auto name = trim(header);
  while (!name.empty() && (name.back() == ':' || std::isspace(static_cast<unsigned char>(name.back())))) {
    name.remove_suffix(1);
  }
  std::string out(name);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool iequal_at(std::string_view text, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > text.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i) {
    if (lower(text[pos + i]) != lower(needle[i])) return false;
  }
  return true;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_alnum(text[i])) ++i;
    if (i >= text.size()) break;
    const std::size_t begin = i;
    std::string tok;
    while (i < text.size() && is_alnum(text[i])) tok.push_back(lower(text[i++]));
    tokens.push_back({std::move(tok), begin, i});
  }
  return tokens;
}

Document::Document(std::string id, std::string text, std::vector<Section> sections)
    : id_(std::move(id)), text_(std::move(text)), sections_(std::move(sections)), tokens_(tokenize(text_)) {
  if (!sections_valid(*this)) throw Error("invalid section spans for document " + id_);
}

Document Document::with_sections(std::vector<Section> sections) const {
  Document copy = *this;
  copy.sections_ = std::move(sections);
  if (!sections_valid(copy)) throw Error("invalid section spans for document " + id_);
  return copy;
}

bool sections_valid(const Document& doc) {
  std::size_t prev_end = 0;
  for (const auto& s : doc.sections()) {
    if (s.start > s.end || s.end > doc.text().size() || s.start < prev_end) return false;
    prev_end = s.end;
  }
  return true;
}

Corpus::Corpus(std::vector<Document> documents, std::string source_path)
    : documents_(std::move(documents)), source_path_(std::move(source_path)) {
  index_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!index_.emplace(documents_[i].id(), i).second) {
      throw ParseError("duplicate document id \"" + documents_[i].id() + "\"");
    }
  }
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) out.push_back(d.id());
  return out;
}

Corpus parse_corpus_jsonl(std::string_view content, std::string_view id_field, std::string_view text_field,
                          std::string source_path) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    const auto where = "line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("malformed corpus " + where + ": " + e.what());
    }
    if (!obj.is_object()) throw ParseError("malformed corpus " + where + ": expected a JSON object");
    const auto id_it = obj.find(id_field);
    const auto text_it = obj.find(text_field);
    if (id_it == obj.end() || text_it == obj.end()) {
      throw ParseError("malformed corpus " + where + ": missing field \"" +
                       std::string(id_it == obj.end() ? id_field : text_field) + "\"");
    }
    std::string id;
    if (id_it->is_string()) {
      id = id_it->get<std::string>();
    } else if (id_it->is_number_integer()) {
      id = id_it->dump();
    } else {
      throw ParseError("malformed corpus " + where + ": id must be a string or integer");
    }
    if (!text_it->is_string()) throw ParseError("malformed corpus " + where + ": text must be a string");
    if (auto [it, fresh] = seen.emplace(id, line_no); !fresh) {
      throw ParseError("duplicate document id \"" + id + "\" at " + where + " (first seen on line " +
                       std::to_string(it->second) + ")");
    }
    docs.emplace_back(std::move(id), text_it->get<std::string>());
  });
  return Corpus(std::move(docs), std::move(source_path));
}

Corpus load_corpus(const std::filesystem::path& path, std::string_view id_field, std::string_view text_field) {
  if (!std::filesystem::exists(path)) throw NotFoundError("corpus file not found: " + path.string());
  return parse_corpus_jsonl(read_file(path), id_field, text_field, path.string());
}

std::string corpus_to_jsonl(const Corpus& corpus, std::string_view id_field, std::string_view text_field) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    nlohmann::json obj;
    obj[std::string(id_field)] = d.id();
    obj[std::string(text_field)] = d.text();
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Document segment_sections(const Document& doc, const std::vector<std::string>& headers) {
  struct Hit {
    std::size_t pos;
    std::size_t len;
    std::string name;
  };
  const std::string_view text = doc.text();
  std::vector<Hit> hits;
  for (const auto& h : headers) {
    if (h.empty()) continue;
    for (std::size_t pos = 0; pos + h.size() <= text.size(); ++pos) {
      if ((pos == 0 || !is_alnum(text[pos - 1])) && iequal_at(text, pos, h)) {
        hits.push_back({pos, h.size(), section_name(h)});
      }
    }
  }
  // Earliest first; on a tie the longer header wins.
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.pos != b.pos ? a.pos < b.pos : a.len > b.len;
  });
  std::vector<Hit> accepted;
  for (auto& h : hits) {
    if (!accepted.empty() && h.pos < accepted.back().pos + accepted.back().len) continue;
    accepted.push_back(std::move(h));
  }

  std::vector<Section> sections;
  sections.push_back({std::string(kPreambleSection), 0, accepted.empty() ? text.size() : accepted.front().pos});
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const std::size_t start = accepted[i].pos + accepted[i].len;
    const std::size_t end = i + 1 < accepted.size() ? accepted[i + 1].pos : text.size();
    sections.push_back({accepted[i].name, start, end});
  }
  return doc.with_sections(std::move(sections));
}

Corpus segment_corpus(const Corpus& corpus, const std::vector<std::string>& headers) {
  std::vector<Document> docs;
  docs.reserve(corpus.size());
  for (const auto& d : corpus.documents()) docs.push_back(segment_sections(d, headers));
  return Corpus(std::move(docs), corpus.source_path());
}

std::vector<DevLabel> parse_dev_labels(std::string_view content, const Corpus& corpus) {
  std::vector<DevLabel> labels;
  bool header_seen = false;
  for_each_line(content, [&](std::size_t line_no, std::string_view raw) {
    const auto line = trim(raw);
    if (line.empty()) return;
    const auto where = "dev label row " + std::to_string(line_no);
    if (!header_seen) {
      header_seen = true;
      if (line == "doc_id,y") return;
      throw ParseError(where + ": expected header \"doc_id,y\"");
    }
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) throw ParseError(where + ": expected doc_id,y");
    const std::string id(trim(line.substr(0, comma)));
    const auto yv = trim(line.substr(comma + 1));
    int y = 0;
    if (yv == "1" || yv == "+1") {
      y = 1;
    } else if (yv == "-1") {
      y = -1;
    } else {
      throw ParseError(where + ": label \"" + std::string(yv) + "\" is not in {-1, 1}");
    }
    if (!corpus.index_of(id)) throw ParseError(where + ": unknown doc_id \"" + id + "\"");
    labels.push_back({id, y});
  });
  return labels;
}

std::vector<DevLabel> load_dev_labels(const std::filesystem::path& path, const Corpus& corpus) {
  if (!std::filesystem::exists(path)) throw NotFoundError("dev label file not found: " + path.string());
  return parse_dev_labels(read_file(path), corpus);
}

std::string dev_labels_to_csv(const std::vector<DevLabel>& labels) {
  std::string out = "doc_id,y\n";
  for (const auto& l : labels) out += l.doc_id + "," + std::to_string(l.y) + "\n";
  return out;
}

}  // namespace labelforge
