#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rnf/conv.h"
#include "rnf/tensor.h"

namespace rnf {

// ---------------------------------------------------------------------------
// Sentiment treebank

/// Binary constituent tree with a sentiment label (0..4) on every node.
struct LabeledTree {
  int label = 0;
  Span span{0, 0};
  std::vector<LabeledTree> children;  // empty (leaf) or exactly two
  std::optional<std::string> token;   // present iff leaf

  bool is_leaf() const { return children.empty(); }
  std::vector<std::string> leaves() const;
};

/// Parses one PTB-style line such as "(3 (2 good) (2 movie))". Spans are
/// assigned by numbering leaves left to right from 0.
LabeledTree parse_tree(std::string_view line);
std::string serialize_tree(const LabeledTree& tree);

/// One treebank per line; blank lines are skipped. Errors report the line.
std::vector<LabeledTree> load_treebank(const std::filesystem::path& path);

struct Phrase {
  Span span;
  std::size_t length = 0;
  int label = 0;
};

/// Every node of the tree in pre-order.
std::vector<Phrase> extract_phrases(const LabeledTree& tree);

enum class Granularity { Binary, FineGrained };

/// 0,1 -> 0 (negative); 3,4 -> 1 (positive); 2 -> nullopt (neutral).
std::optional<int> binary_label(int fine_label);

struct SentenceExample {
  std::vector<std::string> tokens;
  int label = 0;
};

/// Root-level sentences; the binary setting drops neutral sentences.
std::vector<SentenceExample> sentences_from_trees(std::span<const LabeledTree> trees,
                                                  Granularity granularity);

// ---------------------------------------------------------------------------
// Vocabulary and embeddings

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary() = default;
  /// Row 0 is PAD (zeros), row 1 is UNK; `rows` holds the remaining tokens'
  /// vectors in order (row-major, `dim` wide). UNK becomes their mean.
  Vocabulary(std::vector<std::string> tokens, std::size_t dim,
             std::vector<double> rows);

  /// Uniform(-0.5, 0.5) vectors for each distinct token, for synthetic data.
  static Vocabulary random(std::span<const std::string> tokens, std::size_t dim,
                           std::uint64_t seed);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// Frozen V x k matrix.
  const Tensor& embeddings() const { return embeddings_; }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  std::size_t id(const std::string& token) const;
  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  /// Rows for `ids` stacked into an n x k constant tensor.
  Tensor lookup(std::span<const std::size_t> ids) const;

  /// FNV-1a over tokens, dimension and embedding values.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::size_t dim_ = 0;
  Tensor embeddings_;
};

/// Reads "token v1 ... vk" lines. When `vocab_tokens` is non-empty only
/// those tokens are kept. Duplicate tokens keep the first vector and add a
/// message to `warnings` (or stderr when null).
Vocabulary load_embeddings(const std::filesystem::path& path,
                           std::span<const std::string> vocab_tokens = {},
                           std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Answer selection data

/// Writes every non-reserved token as "token v1 ... vk" with round-trip
/// precision, so load_embeddings() rebuilds a vocabulary with the same hash.
void save_embeddings(const Vocabulary& vocab, const std::filesystem::path& path);

struct QaExample {
  std::string question_id;
  std::vector<std::string> question;
  std::vector<std::string> answer;
  int label = 0;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Columns: question_id, question, answer, label (0/1). CRLF tolerated.
std::vector<QaExample> load_qa_tsv(const std::filesystem::path& path);

/// Example indices per question, questions in order of first appearance.
std::vector<std::vector<std::size_t>> group_by_question(std::span<const QaExample> examples);

/// Reads a whole file, throwing ConfigError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);

}  // namespace rnf
