#include "suskit/resources.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "suskit/util.hpp"

namespace suskit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// EmbeddingTable

std::optional<int> EmbeddingTable::lookup(const std::string& word) const {
  auto it = index.find(word);
  if (it == index.end()) return std::nullopt;
  return it->second;
}

void EmbeddingTable::add(const std::string& word, const VectorXd& vec) {
  if (index.count(word)) throw std::invalid_argument("duplicate embedding word: " + word);
  if (vectors.rows() > 0 && vec.size() != vectors.cols())
    throw std::invalid_argument("embedding dimension mismatch for word: " + word);
  if (!vec.allFinite()) throw std::invalid_argument("non-finite embedding for word: " + word);
  index[word] = static_cast<int>(words.size());
  words.push_back(word);
  MatrixXd grown(vectors.rows() + 1, vec.size());
  if (vectors.rows() > 0) grown.topRows(vectors.rows()) = vectors;
  grown.row(grown.rows() - 1) = vec.transpose();
  vectors = std::move(grown);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  std::vector<std::string> words;
  std::vector<VectorXd> rows;
  std::unordered_map<std::string, int> index;
  int dim = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto trimmed = trim(line);
    if (trimmed.empty()) continue;
    std::istringstream ls{std::string(trimmed)};
    std::string word;
    ls >> word;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty())
      throw std::runtime_error("embedding line " + std::to_string(line_no) + ": no values");
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim)
      throw std::runtime_error("embedding line " + std::to_string(line_no) +
                               ": dimension mismatch");
    if (index.count(word))
      throw std::runtime_error("embedding line " + std::to_string(line_no) +
                               ": duplicate word " + word);
    VectorXd row(dim);
    for (int i = 0; i < dim; ++i) {
      if (!std::isfinite(vals[i]))
        throw std::runtime_error("embedding line " + std::to_string(line_no) +
                                 ": non-finite value");
      row[i] = vals[i];
    }
    index[word] = static_cast<int>(words.size());
    words.push_back(word);
    rows.push_back(std::move(row));
  }
  if (words.empty()) throw std::runtime_error("embedding file is empty: " + path.string());
  EmbeddingTable table;
  table.words = std::move(words);
  table.index = std::move(index);
  table.vectors = MatrixXd(table.words.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) table.vectors.row(i) = rows[i].transpose();
  return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < words.size(); ++i) {
    out << words[i];
    for (int j = 0; j < vectors.cols(); ++j) out << ' ' << vectors(i, j);
    out << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, const std::string& word,
                                        int k, double min_cos) {
  if (k <= 0) throw std::invalid_argument("nearest_neighbors: k must be positive");
  auto idx = table.lookup(word);
  if (!idx) return {};
  const VectorXd query = table.vectors.row(*idx).transpose();
  std::vector<Neighbor> all;
  all.reserve(table.words.size());
  for (std::size_t i = 0; i < table.words.size(); ++i) {
    if (table.words[i] == word) continue;
    double c = cosine(query, table.vectors.row(i).transpose());
    if (c >= min_cos) all.push_back({table.words[i], c});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.word < b.word;
  });
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------
// IdfTable

double IdfTable::operator()(const std::string& word) const {
  auto it = values.find(word);
  return it == values.end() ? default_idf : it->second;
}

IdfTable IdfTable::from_documents(const std::vector<std::vector<std::string>>& docs) {
  if (docs.empty()) throw std::invalid_argument("IdfTable: no documents");
  std::unordered_map<std::string, std::int64_t> df;
  for (const auto& doc : docs) {
    std::unordered_map<std::string, bool> seen;
    for (const auto& w : doc) {
      if (!seen.count(w)) {
        seen[w] = true;
        ++df[w];
      }
    }
  }
  IdfTable t;
  t.n_documents = static_cast<std::int64_t>(docs.size());
  const double n = static_cast<double>(t.n_documents);
  for (const auto& [w, d] : df)
    t.values[w] = std::log((n + 1.0) / (static_cast<double>(d) + 1.0)) + 1.0;
  t.default_idf = std::log(n + 1.0) + 1.0;
  return t;
}

IdfTable IdfTable::load(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path));
  IdfTable t;
  t.n_documents = j.at("n_documents").get<std::int64_t>();
  t.default_idf = j.at("default_idf").get<double>();
  for (auto& [k, v] : j.at("values").items()) t.values[k] = v.get<double>();
  return t;
}

void IdfTable::save(const std::filesystem::path& path) const {
  json j;
  j["n_documents"] = n_documents;
  j["default_idf"] = default_idf;
  json vals = json::object();
  for (const auto& [k, v] : values) vals[k] = v;
  j["values"] = std::move(vals);
  write_text_file(path, j.dump(2) + "\n");
}

SentenceVector sentence_vector(const std::vector<std::string>& tokens, const EmbeddingTable& emb,
                               const IdfTable& idf) {
  SentenceVector out;
  out.vec = VectorXd::Zero(emb.dim());
  double weight_sum = 0.0;
  for (const auto& tok : tokens) {
    auto idx = emb.lookup(tok);
    if (!idx) continue;
    const double w = idf(tok);
    out.vec += w * emb.vectors.row(*idx).transpose();
    weight_sum += w;
  }
  if (weight_sum == 0.0) {
    out.all_oov = true;
    out.vec.setZero();
    return out;
  }
  out.vec /= weight_sum;
  return out;
}

// ---------------------------------------------------------------------------
// NgramModel

namespace {
constexpr char kContextSep = '\x1f';

std::string context_key(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t count) {
  std::string key;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) key += kContextSep;
    key += tokens[begin + i];
  }
  return key;
}
}  // namespace

NgramModel NgramModel::fit(const std::vector<std::vector<std::string>>& corpus, int order,
                           double alpha) {
  if (order < 1) throw std::invalid_argument("NgramModel: order must be >= 1");
  if (alpha <= 0.0) throw std::invalid_argument("NgramModel: alpha must be positive");
  NgramModel m;
  m.order = order;
  m.alpha = alpha;
  for (const auto& sent : corpus) {
    for (const auto& w : sent) {
      if (!m.vocab_index.count(w)) {
        m.vocab_index[w] = static_cast<int>(m.vocab.size());
        m.vocab.push_back(w);
      }
    }
    if (static_cast<int>(sent.size()) < order) continue;
    for (std::size_t i = 0; i + order <= sent.size(); ++i) {
      std::string ctx = context_key(sent, i, order - 1);
      ++m.counts[ctx][sent[i + order - 1]];
      ++m.context_totals[ctx];
    }
  }
  if (m.vocab.empty()) throw std::invalid_argument("NgramModel: empty corpus");
  return m;
}

double NgramModel::log_prob(const std::vector<std::string>& context,
                            const std::string& word) const {
  if (static_cast<int>(context.size()) != order - 1)
    throw std::invalid_argument("NgramModel::log_prob: context must have order-1 tokens");
  std::string key = context_key(context, 0, context.size());
  double num = alpha;
  double den = alpha * static_cast<double>(vocab.size());
  auto tot = context_totals.find(key);
  if (tot != context_totals.end()) {
    den += static_cast<double>(tot->second);
    const auto& inner = counts.at(key);
    auto it = inner.find(word);
    if (it != inner.end()) num += static_cast<double>(it->second);
  }
  return std::log(num) - std::log(den);
}

NgramModel NgramModel::load(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path));
  NgramModel m;
  m.order = j.at("order").get<int>();
  m.alpha = j.at("alpha").get<double>();
  for (auto& w : j.at("vocab")) {
    m.vocab_index[w.get<std::string>()] = static_cast<int>(m.vocab.size());
    m.vocab.push_back(w.get<std::string>());
  }
  for (auto& [ctx, inner] : j.at("counts").items()) {
    std::int64_t total = 0;
    for (auto& [w, c] : inner.items()) {
      m.counts[ctx][w] = c.get<std::int64_t>();
      total += c.get<std::int64_t>();
    }
    m.context_totals[ctx] = total;
  }
  return m;
}

void NgramModel::save(const std::filesystem::path& path) const {
  json j;
  j["order"] = order;
  j["alpha"] = alpha;
  j["vocab"] = vocab;
  json cj = json::object();
  for (const auto& [ctx, inner] : counts) {
    json ij = json::object();
    for (const auto& [w, c] : inner) ij[w] = c;
    cj[ctx] = std::move(ij);
  }
  j["counts"] = std::move(cj);
  write_text_file(path, j.dump() + "\n");
}

double context_score(const std::vector<std::string>& tokens, std::size_t position,
                     const std::string& candidate, const NgramModel& model) {
  if (position >= tokens.size())
    throw std::invalid_argument("context_score: position out of range");
  std::vector<std::string> work = tokens;
  work[position] = candidate;
  const int n = model.order;
  if (static_cast<int>(work.size()) < n) return 0.0;
  double score = 0.0;
  // Windows [s, s+n) containing `position`.
  const std::size_t lo = position + 1 >= static_cast<std::size_t>(n)
                             ? position + 1 - static_cast<std::size_t>(n)
                             : 0;
  for (std::size_t s = lo; s <= position && s + n <= work.size(); ++s) {
    std::vector<std::string> ctx(work.begin() + s, work.begin() + s + n - 1);
    score += model.log_prob(ctx, work[s + n - 1]);
  }
  return score;
}

// ---------------------------------------------------------------------------
// PosLexicon

std::uint8_t pos_tags_from_suffix(const std::string& word) {
  auto ends_with = [&](const char* suf) {
    std::size_t len = std::string_view(suf).size();
    return word.size() > len && word.compare(word.size() - len, len, suf) == 0;
  };
  if (ends_with("ly")) return POS_ADV;
  if (ends_with("ness") || ends_with("tion") || ends_with("sion") || ends_with("ment") ||
      ends_with("ity") || ends_with("ism") || ends_with("ship"))
    return POS_NOUN;
  if (ends_with("ize") || ends_with("ise") || ends_with("ify"))
    return POS_VERB;
  if (ends_with("ous") || ends_with("ful") || ends_with("ive") || ends_with("able") ||
      ends_with("ible") || ends_with("al") || ends_with("ish") || ends_with("less") ||
      ends_with("ic"))
    return POS_ADJ;
  if (ends_with("ing") || ends_with("ed"))
    return static_cast<std::uint8_t>(POS_VERB | POS_ADJ);
  return POS_OTHER;
}

std::uint8_t PosLexicon::tags(const std::string& word) const {
  auto it = entries.find(word);
  if (it != entries.end() && it->second != 0) return it->second;
  return pos_tags_from_suffix(word);
}

std::string pos_tags_to_string(std::uint8_t tags) {
  std::string out;
  auto add = [&](const char* name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (tags & POS_NOUN) add("noun");
  if (tags & POS_VERB) add("verb");
  if (tags & POS_ADJ) add("adj");
  if (tags & POS_ADV) add("adv");
  if (tags & POS_OTHER) add("other");
  return out;
}

std::uint8_t pos_tags_from_string(const std::string& s) {
  std::uint8_t tags = 0;
  for (const auto& part : split(s, ',')) {
    auto p = trim(part);
    if (p == "noun") tags |= POS_NOUN;
    else if (p == "verb") tags |= POS_VERB;
    else if (p == "adj") tags |= POS_ADJ;
    else if (p == "adv") tags |= POS_ADV;
    else if (p == "other") tags |= POS_OTHER;
    else if (!p.empty()) throw std::runtime_error("unknown pos tag: " + std::string(p));
  }
  return tags;
}

PosLexicon PosLexicon::load(const std::filesystem::path& path) {
  PosLexicon lex;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cols = split(line, '\t');
    if (cols.size() != 2)
      throw std::runtime_error("pos lexicon line " + std::to_string(line_no) +
                               ": expected 2 tab-separated columns");
    std::uint8_t tags = pos_tags_from_string(cols[1]);
    if (tags == 0)
      throw std::runtime_error("pos lexicon line " + std::to_string(line_no) + ": no tags");
    lex.entries[lower_ascii(trim(cols[0]))] = tags;
  }
  return lex;
}

void PosLexicon::save(const std::filesystem::path& path) const {
  std::vector<std::string> words;
  words.reserve(entries.size());
  for (const auto& [w, _] : entries) words.push_back(w);
  std::sort(words.begin(), words.end());
  std::ostringstream out;
  for (const auto& w : words) out << w << '\t' << pos_tags_to_string(entries.at(w)) << '\n';
  write_text_file(path, out.str());
}

bool pos_compatible(const std::string& a, const std::string& b, const PosLexicon& lex) {
  return (lex.tags(a) & lex.tags(b)) != 0;
}

// ---------------------------------------------------------------------------
// KeyboardLayout

const std::string& KeyboardLayout::neighbors(char c) const {
  static const std::string empty;
  auto it = adjacent.find(c);
  return it == adjacent.end() ? empty : it->second;
}

KeyboardLayout KeyboardLayout::qwerty() {
  // Horizontal and diagonal neighbours on the three letter rows.
  static const char* rows[3] = {"qwertyuiop", "asdfghjkl", "zxcvbnm"};
  // Column offset of each row relative to the one above it.
  static const double offsets[3] = {0.0, 0.25, 0.75};
  KeyboardLayout layout;
  auto near = [&](int r1, int i1, int r2, int i2) {
    double x1 = offsets[r1] + i1;
    double x2 = offsets[r2] + i2;
    return std::abs(x1 - x2) < 1.0;
  };
  for (int r = 0; r < 3; ++r) {
    const std::string row = rows[r];
    for (int i = 0; i < static_cast<int>(row.size()); ++i) {
      std::string& adj = layout.adjacent[row[i]];
      if (i > 0) adj += row[i - 1];
      if (i + 1 < static_cast<int>(row.size())) adj += row[i + 1];
      for (int dr : {-1, 1}) {
        int r2 = r + dr;
        if (r2 < 0 || r2 > 2) continue;
        const std::string other = rows[r2];
        for (int j = 0; j < static_cast<int>(other.size()); ++j)
          if (near(r, i, r2, j)) adj += other[j];
      }
    }
  }
  return layout;
}

}  // namespace suskit
