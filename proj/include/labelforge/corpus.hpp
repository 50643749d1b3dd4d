#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace labelforge {

/// A maximal alphanumeric run, lowercased, with its byte span in the source.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

/// Lowercases and splits on every run of non-alphanumeric bytes.
std::vector<Token> tokenize(std::string_view text);

struct Section {
  std::string name;
  std::size_t start = 0;  ///< byte offset of the section body
  std::size_t end = 0;    ///< one past the last byte

  bool operator==(const Section&) const = default;
};

inline constexpr std::string_view kPreambleSection = "PREAMBLE";

/// One auxiliary-modality report. Immutable once built.
class Document {
 public:
  Document(std::string id, std::string text, std::vector<Section> sections = {});

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  const std::vector<Section>& sections() const noexcept { return sections_; }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  std::size_t token_count() const noexcept { return tokens_.size(); }

  /// Copy of this document with a different section map.
  Document with_sections(std::vector<Section> sections) const;

 private:
  std::string id_;
  std::string text_;
  std::vector<Section> sections_;
  std::vector<Token> tokens_;
};

/// True when spans are ordered, non-overlapping and inside the text.
bool sections_valid(const Document& doc);

/// Ordered collection of documents with unique ids.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Document> documents, std::string source_path = {});

  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::string& source_path() const noexcept { return source_path_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::vector<Document> documents_;
  std::string source_path_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct DevLabel {
  std::string doc_id;
  int y = 0;  ///< -1 or +1

  bool operator==(const DevLabel&) const = default;
};

/// Reads a JSONL corpus. Throws ParseError with the offending line number.
Corpus load_corpus(const std::filesystem::path& path, std::string_view id_field = "id",
                   std::string_view text_field = "text");
Corpus parse_corpus_jsonl(std::string_view content, std::string_view id_field = "id",
                          std::string_view text_field = "text", std::string source_path = {});
std::string corpus_to_jsonl(const Corpus& corpus, std::string_view id_field = "id",
                            std::string_view text_field = "text");

/// Splits a document at case-insensitive literal headers.
///
/// Text before the first header becomes the (possibly empty) PREAMBLE
/// section; each header opens a section named after it, uppercased with
/// any trailing colon removed, running to the next header or end of text.
Document segment_sections(const Document& doc, const std::vector<std::string>& headers);
Corpus segment_corpus(const Corpus& corpus, const std::vector<std::string>& headers);

/// Reads `doc_id,y` CSV (header row required unless the file is empty).
std::vector<DevLabel> load_dev_labels(const std::filesystem::path& path, const Corpus& corpus);
std::vector<DevLabel> parse_dev_labels(std::string_view content, const Corpus& corpus);
std::string dev_labels_to_csv(const std::vector<DevLabel>& labels);

}  // namespace labelforge
