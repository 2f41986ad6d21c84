#include "rnf/data.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "rnf/errors.h"

namespace rnf {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), is_space);
}

// ---------------------------------------------------------------------------
// Tree parser

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) : text_(text) {}

  LabeledTree parse() {
    LabeledTree root = node();
    skip_space();
    if (pos_ != text_.size()) throw ParseError("trailing characters after tree", pos_);
    return root;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  char peek() {
    if (pos_ >= text_.size()) throw ParseError("unbalanced parentheses", pos_);
    return text_[pos_];
  }

  void expect(char c) {
    skip_space();
    if (peek() != c) {
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
    ++pos_;
  }

  std::string_view atom() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  int label() {
    skip_space();
    const std::size_t at = pos_;
    const std::string_view raw = atom();
    if (raw.empty()) throw ParseError("missing label", at);
    int value = 0;
    for (char c : raw) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw ParseError("non-integer label '" + std::string(raw) + "'", at);
      }
      value = value * 10 + (c - '0');
      if (value > 4) break;
    }
    if (value > 4) throw ParseError("label '" + std::string(raw) + "' outside 0..4", at);
    return value;
  }

  LabeledTree node() {
    expect('(');
    LabeledTree tree;
    tree.label = label();
    skip_space();
    if (peek() == '(') {
      tree.children.push_back(node());
      skip_space();
      if (peek() != '(') {
        throw ParseError("internal node needs exactly two children", pos_);
      }
      tree.children.push_back(node());
      skip_space();
      if (peek() == '(') {
        throw ParseError("internal node needs exactly two children", pos_);
      }
      tree.span = {tree.children.front().span.first, tree.children.back().span.second};
    } else {
      const std::size_t at = pos_;
      const std::string_view tok = atom();
      if (tok.empty()) throw ParseError("missing token", at);
      tree.token = std::string(tok);
      tree.span = {next_leaf_, next_leaf_};
      ++next_leaf_;
    }
    expect(')');
    return tree;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t next_leaf_ = 0;
};

void collect_leaves(const LabeledTree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    out.push_back(*t.token);
    return;
  }
  for (const auto& c : t.children) collect_leaves(c, out);
}

void serialize_into(const LabeledTree& t, std::string& out) {
  out += '(';
  out += std::to_string(t.label);
  if (t.is_leaf()) {
    out += ' ';
    out += *t.token;
  } else {
    for (const auto& c : t.children) {
      out += ' ';
      serialize_into(c, out);
    }
  }
  out += ')';
}

void collect_phrases(const LabeledTree& t, std::vector<Phrase>& out) {
  out.push_back({t.span, t.span.second - t.span.first + 1, t.label});
  for (const auto& c : t.children) collect_phrases(c, out);
}

}  // namespace

std::vector<std::string> LabeledTree::leaves() const {
  std::vector<std::string> out;
  collect_leaves(*this, out);
  return out;
}

LabeledTree parse_tree(std::string_view line) { return TreeParser(line).parse(); }

std::string serialize_tree(const LabeledTree& tree) {
  std::string out;
  serialize_into(tree, out);
  return out;
}

std::vector<LabeledTree> load_treebank(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<LabeledTree> trees;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    try {
      trees.push_back(parse_tree(lines[i]));
    } catch (const ParseError& e) {
      throw FormatError(path.string() + ": " + e.what(), i + 1);
    }
  }
  return trees;
}

std::vector<Phrase> extract_phrases(const LabeledTree& tree) {
  std::vector<Phrase> out;
  collect_phrases(tree, out);
  return out;
}

std::optional<int> binary_label(int fine_label) {
  if (fine_label <= 1) return 0;
  if (fine_label >= 3) return 1;
  return std::nullopt;
}

std::vector<SentenceExample> sentences_from_trees(std::span<const LabeledTree> trees,
                                                  Granularity granularity) {
  std::vector<SentenceExample> out;
  for (const auto& t : trees) {
    int label = t.label;
    if (granularity == Granularity::Binary) {
      auto b = binary_label(t.label);
      if (!b) continue;
      label = *b;
    }
    out.push_back({t.leaves(), label});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::size_t dim,
                       std::vector<double> rows)
    : dim_(dim) {
  if (rows.size() != tokens.size() * dim) {
    throw DimensionError("vocabulary of " + std::to_string(tokens.size()) +
                         " tokens given " + std::to_string(rows.size()) +
                         " embedding values at width " + std::to_string(dim));
  }
  std::vector<double> matrix((tokens.size() + 2) * dim, 0.0);
  if (!tokens.empty()) {
    for (std::size_t r = 0; r < tokens.size(); ++r)
      for (std::size_t j = 0; j < dim; ++j) matrix[kUnk * dim + j] += rows[r * dim + j];
    for (std::size_t j = 0; j < dim; ++j) {
      matrix[kUnk * dim + j] /= static_cast<double>(tokens.size());
    }
  }
  std::copy(rows.begin(), rows.end(), matrix.begin() + 2 * dim);

  tokens_.reserve(tokens.size() + 2);
  tokens_.push_back(kPadToken);
  tokens_.push_back(kUnkToken);
  for (auto& t : tokens) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) {
      throw ArgumentError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  embeddings_ = Tensor::from({tokens_.size(), dim}, std::move(matrix), false);
}

Vocabulary Vocabulary::random(std::span<const std::string> tokens, std::size_t dim,
                              std::uint64_t seed) {
  std::vector<std::string> distinct;
  std::unordered_set<std::string> seen{kPadToken, kUnkToken};
  for (const auto& t : tokens) {
    if (seen.insert(t).second) distinct.push_back(t);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  std::vector<double> rows(distinct.size() * dim);
  for (auto& v : rows) v = dist(rng);
  return Vocabulary(std::move(distinct), dim, std::move(rows));
}

std::size_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Tensor Vocabulary::lookup(std::span<const std::size_t> ids) const {
  const auto table = embeddings_.data();
  std::vector<double> out(ids.size() * dim_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= size()) throw ArgumentError("token id out of range");
    std::copy_n(table.begin() + ids[i] * dim_, dim_, out.begin() + i * dim_);
  }
  return Tensor::from({ids.size(), dim_}, std::move(out), false);
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("rnf-vocab");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n", 1), h);
  }
  h = fnv1a(std::to_string(dim_), h);
  for (double v : embeddings_.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    h = fnv1a(std::string_view(bytes, 8), h);
  }
  return h;
}

Vocabulary load_embeddings(const std::filesystem::path& path,
                           std::span<const std::string> vocab_tokens,
                           std::vector<std::string>* warnings) {
  const std::string text = read_file(path);
  const std::unordered_set<std::string> wanted(vocab_tokens.begin(), vocab_tokens.end());
  std::unordered_set<std::string> seen;
  std::vector<std::string> tokens;
  std::vector<double> rows;
  std::size_t dim = 0;
  bool have_dim = false;

  auto warn = [&](const std::string& msg) {
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::cerr << "warning: " << msg << '\n';
    }
  };

  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (is_blank(line)) continue;
    std::istringstream fields{std::string(line)};
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || errno == ERANGE) {
        throw FormatError(path.string() + ": non-numeric value '" + field + "'", li + 1);
      }
      values.push_back(v);
    }
    if (values.empty()) {
      throw FormatError(path.string() + ": no vector values for '" + token + "'", li + 1);
    }
    if (!have_dim) {
      dim = values.size();
      have_dim = true;
    } else if (values.size() != dim) {
      throw FormatError(path.string() + ": expected " + std::to_string(dim) +
                            " values, found " + std::to_string(values.size()),
                        li + 1);
    }
    if (token == Vocabulary::kPadToken || token == Vocabulary::kUnkToken) {
      warn("reserved token '" + token + "' on line " + std::to_string(li + 1) + " ignored");
      continue;
    }
    if (!wanted.empty() && !wanted.count(token)) continue;
    if (!seen.insert(token).second) {
      warn("duplicate token '" + token + "' on line " + std::to_string(li + 1) +
           "; keeping the first vector");
      continue;
    }
    tokens.push_back(std::move(token));
    rows.insert(rows.end(), values.begin(), values.end());
  }
  if (!have_dim) throw FormatError(path.string() + ": no embedding vectors", 1);
  return Vocabulary(std::move(tokens), dim, std::move(rows));
}

void save_embeddings(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write embeddings: " + path.string());
  const auto values = vocab.embeddings().data();
  char buf[32];
  for (std::size_t i = 2; i < vocab.size(); ++i) {
    out << vocab.tokens()[i];
    for (std::size_t j = 0; j < vocab.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), " %.17g", values[i * vocab.dim() + j]);
      out << buf;
    }
    out << '\n';
  }
  out.close();
  if (!out) throw IoError("failed writing embeddings: " + path.string());
}

// ---------------------------------------------------------------------------
// QA

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (is_space(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<QaExample> load_qa_tsv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<QaExample> out;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string_view line = lines[li];
    if (is_blank(line)) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string_view::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 4) {
      throw FormatError(path.string() + ": expected 4 tab-separated columns, found " +
                            std::to_string(cols.size()),
                        li + 1);
    }
    std::string_view label = cols[3];
    while (!label.empty() && is_space(label.back())) label.remove_suffix(1);
    while (!label.empty() && is_space(label.front())) label.remove_prefix(1);
    if (label != "0" && label != "1") {
      throw FormatError(path.string() + ": label must be 0 or 1, found '" +
                            std::string(label) + "'",
                        li + 1);
    }
    QaExample ex;
    ex.question_id = std::string(cols[0]);
    ex.question = tokenize(cols[1]);
    ex.answer = tokenize(cols[2]);
    ex.label = label == "1" ? 1 : 0;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::vector<std::size_t>> group_by_question(std::span<const QaExample> examples) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto [it, inserted] = index.emplace(examples[i].question_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

}  // namespace rnf
