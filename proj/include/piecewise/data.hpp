#pragma once

// Column corpora (CoNLL style), seeded synthetic corpora and F1 scoring.
//
// File format: one token per line, whitespace-separated columns, a blank line
// between instances. Lines starting with "##" are comments.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "piecewise/core.hpp"
#include "piecewise/crf.hpp"

namespace piecewise::data {

/// Which columns hold the word and the labels. Negative indices count from the end;
/// every other column is passed through as a token attribute.
struct ColumnSchema {
  int word_column = 0;
  std::vector<int> label_columns{-1};
};

using Row = std::vector<std::string>;

struct ColumnCorpus {
  std::vector<std::vector<Row>> instances;
  int columns = 0;
  ColumnSchema schema;

  std::size_t size() const { return instances.size(); }

  int resolve(int col) const { return col < 0 ? columns + col : col; }

  std::vector<int> attribute_columns() const {
    std::set<int> taken{resolve(schema.word_column)};
    for (int c : schema.label_columns) taken.insert(resolve(c));
    std::vector<int> out;
    for (int c = 0; c < columns; ++c)
      if (!taken.count(c)) out.push_back(c);
    return out;
  }

  crf::TokenSequence input(std::size_t i) const {
    crf::TokenSequence x;
    const int wc = resolve(schema.word_column);
    const auto attrs = attribute_columns();
    for (const Row& r : instances[i]) {
      x.tokens.push_back(r[static_cast<std::size_t>(wc)]);
      Row a;
      for (int c : attrs) a.push_back(r[static_cast<std::size_t>(c)]);
      x.attributes.push_back(std::move(a));
    }
    return x;
  }

  /// labels[level][position] as strings.
  std::vector<std::vector<std::string>> labels(std::size_t i) const {
    std::vector<std::vector<std::string>> out;
    for (int c : schema.label_columns) {
      std::vector<std::string> col;
      for (const Row& r : instances[i]) col.push_back(r[static_cast<std::size_t>(resolve(c))]);
      out.push_back(std::move(col));
    }
    return out;
  }

  std::vector<crf::TokenSequence> inputs() const {
    std::vector<crf::TokenSequence> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(input(i));
    return out;
  }

  std::vector<std::vector<std::vector<std::string>>> all_labels() const {
    std::vector<std::vector<std::vector<std::string>>> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(labels(i));
    return out;
  }

  /// Label alphabet of one label column, in order of first appearance.
  crf::Alphabet label_alphabet(std::size_t level) const {
    crf::Alphabet a;
    for (const auto& inst : instances)
      for (const Row& r : inst) a.add(r[static_cast<std::size_t>(resolve(schema.label_columns.at(level)))]);
    return a;
  }

  bool operator==(const ColumnCorpus& o) const { return instances == o.instances && columns == o.columns; }
};

inline ColumnCorpus read_conll(std::istream& in, const ColumnSchema& schema = {},
                               const std::string& source = "<stream>") {
  ColumnCorpus corpus;
  corpus.schema = schema;
  std::vector<Row> current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.empty()) corpus.instances.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("##", 0) == 0) continue;
    std::istringstream ss(line);
    Row row;
    for (std::string field; ss >> field;) row.push_back(field);
    if (row.empty()) {
      flush();
      continue;
    }
    if (corpus.columns == 0) corpus.columns = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != corpus.columns)
      throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(corpus.columns) +
                      " columns, found " + std::to_string(row.size()));
    current.push_back(std::move(row));
  }
  flush();
  if (corpus.instances.empty()) throw DataError(source + ": no instances found");
  auto check = [&](int col) {
    const int c = corpus.resolve(col);
    if (c < 0 || c >= corpus.columns)
      throw DataError(source + ": column " + std::to_string(col) + " does not exist (file has " +
                      std::to_string(corpus.columns) + ")");
  };
  check(schema.word_column);
  for (int c : schema.label_columns) check(c);
  return corpus;
}

inline ColumnCorpus read_conll(const std::string& path, const ColumnSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_conll(in, schema, path);
}

inline void write_conll(std::ostream& out, const ColumnCorpus& corpus, const std::string& header = {}) {
  if (!header.empty()) out << "## " << header << '\n';
  for (std::size_t i = 0; i < corpus.instances.size(); ++i) {
    if (i) out << '\n';
    for (const Row& r : corpus.instances[i]) {
      for (std::size_t c = 0; c < r.size(); ++c) out << (c ? " " : "") << r[c];
      out << '\n';
    }
  }
}

/// Seeded shuffle of instance indices split into (first, rest) with |first| = round(fraction * n).
inline std::pair<ColumnCorpus, ColumnCorpus> random_split(const ColumnCorpus& corpus, double fraction,
                                                          std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  ColumnCorpus a, b;
  a.columns = b.columns = corpus.columns;
  a.schema = b.schema = corpus.schema;
  for (std::size_t k = 0; k < order.size(); ++k)
    (k < cut ? a : b).instances.push_back(corpus.instances[order[k]]);
  return {a, b};
}

// ---------------------------------------------------------------------------
// Synthetic corpora

/// True generative model for synthetic data. Labels follow a chain MRF (for the
/// factorial structure, a chain over joint label pairs with cotemporal couplings);
/// tokens are drawn per position from the emission row of the level-0 label.
struct SyntheticSpec {
  crf::StructureKind structure = crf::StructureKind::linear_chain;
  std::vector<std::vector<std::string>> labels;  // per level
  std::vector<Vector> bias;                      // per level, one entry per label
  std::vector<Vector> transition;                // per level, row-major L x L
  Vector cotemporal;                             // L0 x L1, factorial only
  std::vector<std::string> vocabulary;
  std::vector<Vector> emission;  // per level-0 label, nonnegative weights over the vocabulary
  // Skip chain: chance that a position whose label is in repeat_labels reuses a token
  // already emitted for that label earlier in the instance.
  double repeat_probability = 0.0;
  std::vector<std::string> repeat_labels;

  int levels() const { return static_cast<int>(labels.size()); }

  void validate() const {
    const int want = crf::structure_levels(structure);
    if (levels() != want) throw DataError("synthetic spec needs " + std::to_string(want) + " label level(s)");
    if (bias.size() != labels.size() || transition.size() != labels.size())
      throw DataError("synthetic spec needs bias and transition tables per level");
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const std::size_t l = labels[k].size();
      if (l == 0) throw DataError("synthetic spec has an empty label set");
      if (bias[k].size() != l || transition[k].size() != l * l)
        throw DataError("synthetic spec tables do not match label counts");
    }
    if (structure == crf::StructureKind::factorial && cotemporal.size() != labels[0].size() * labels[1].size())
      throw DataError("factorial spec needs an L0 x L1 cotemporal table");
    if (vocabulary.empty() || emission.size() != labels[0].size())
      throw DataError("synthetic spec needs one emission row per level-0 label");
    for (const auto& row : emission) {
      if (row.size() != vocabulary.size()) throw DataError("emission row length differs from vocabulary size");
      double total = 0.0;
      for (double w : row) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("emission weights must be nonnegative");
        total += w;
      }
      if (!(total > 0.0)) throw DataError("emission row has zero mass");
    }
    if (!(repeat_probability >= 0.0 && repeat_probability <= 1.0))
      throw DataError("repeat probability must be in [0,1]");
  }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Index drawn proportionally to exp(logw).
inline std::size_t sample_log(std::span<const double> logw, std::mt19937_64& rng) {
  const double lse = log_sum_exp(logw);
  double u = uniform01(rng);
  for (std::size_t i = 0; i < logw.size(); ++i) {
    u -= std::exp(logw[i] - lse);
    if (u < 0.0) return i;
  }
  return logw.size() - 1;
}

inline std::size_t sample_weights(std::span<const double> w, std::mt19937_64& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    u -= w[i];
    if (u < 0.0) return i;
  }
  return w.size() - 1;
}

/// Exact forward sampling from a homogeneous chain MRF with node and pair log-potentials.
inline std::vector<std::size_t> sample_chain(const Vector& node, const Vector& pair, std::size_t states,
                                             std::size_t n, std::mt19937_64& rng) {
  std::vector<Vector> beta(n, Vector(states, 0.0));
  Vector terms(states);
  for (std::size_t t = n - 1; t-- > 0;)
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t s2 = 0; s2 < states; ++s2) terms[s2] = pair[s * states + s2] + node[s2] + beta[t + 1][s2];
      beta[t][s] = log_sum_exp(terms);
    }
  std::vector<std::size_t> y(n);
  for (std::size_t s = 0; s < states; ++s) terms[s] = node[s] + beta[0][s];
  y[0] = sample_log(terms, rng);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t s = 0; s < states; ++s) terms[s] = pair[y[t - 1] * states + s] + node[s] + beta[t][s];
    y[t] = sample_log(terms, rng);
  }
  return y;
}

}  // namespace detail

/// Draws `count` instances with lengths uniform in [min_length, max_length]. Deterministic
/// given the seed. Columns: token, then one label column per level.
inline ColumnCorpus generate_synthetic(const SyntheticSpec& spec, std::size_t count, int min_length, int max_length,
                                       std::uint64_t seed) {
  spec.validate();
  if (min_length < 1 || max_length < min_length) throw DataError("invalid length range");
  std::mt19937_64 rng(seed);

  // Joint chain over label tuples: one level, or (level0, level1) pairs for factorial.
  const std::size_t l0 = spec.labels[0].size();
  const std::size_t l1 = spec.levels() == 2 ? spec.labels[1].size() : 1;
  const std::size_t states = l0 * l1;
  Vector node(states, 0.0), pair(states * states, 0.0);
  for (std::size_t s = 0; s < states; ++s) {
    const std::size_t a = s / l1, b = s % l1;
    node[s] = spec.bias[0][a];
    if (spec.levels() == 2) node[s] += spec.bias[1][b] + spec.cotemporal[a * l1 + b];
    for (std::size_t s2 = 0; s2 < states; ++s2) {
      const std::size_t a2 = s2 / l1, b2 = s2 % l1;
      double p = spec.transition[0][a * l0 + a2];
      if (spec.levels() == 2) p += spec.transition[1][b * l1 + b2];
      pair[s * states + s2] = p;
    }
  }
  std::set<std::size_t> repeatable;
  for (const auto& name : spec.repeat_labels)
    for (std::size_t a = 0; a < l0; ++a)
      if (spec.labels[0][a] == name) repeatable.insert(a);

  ColumnCorpus corpus;
  corpus.columns = 1 + spec.levels();
  corpus.schema.word_column = 0;
  corpus.schema.label_columns.clear();
  for (int k = 0; k < spec.levels(); ++k) corpus.schema.label_columns.push_back(1 + k);

  const auto span_len = static_cast<std::uint64_t>(max_length - min_length + 1);
  for (std::size_t i = 0; i < count; ++i) {
    const auto n = static_cast<std::size_t>(min_length) + static_cast<std::size_t>(rng() % span_len);
    const auto y = detail::sample_chain(node, pair, states, n, rng);
    std::map<std::size_t, std::vector<std::size_t>> emitted;  // level-0 label -> token ids so far
    std::vector<Row> rows;
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t a = y[t] / l1, b = y[t] % l1;
      std::size_t tok;
      auto& seen = emitted[a];
      if (repeatable.count(a) && !seen.empty() && detail::uniform01(rng) < spec.repeat_probability)
        tok = seen[static_cast<std::size_t>(rng() % seen.size())];
      else
        tok = detail::sample_weights(spec.emission[a], rng);
      seen.push_back(tok);
      Row r{spec.vocabulary[tok], spec.labels[0][a]};
      if (spec.levels() == 2) r.push_back(spec.labels[1][b]);
      rows.push_back(std::move(r));
    }
    corpus.instances.push_back(std::move(rows));
  }
  return corpus;
}

/// Built-in generators: "chain" (BIO entities, strong transitions, noisy emissions),
/// "skipchain" (speaker/location fields with repeated capitalized names) and
/// "factorial" (tag chain coupled to a BIO chunk chain).
inline SyntheticSpec preset_spec(const std::string& name) {
  SyntheticSpec s;
  if (name == "chain") {
    s.structure = crf::StructureKind::linear_chain;
    s.labels = {{"B-ENT", "I-ENT", "O"}};
    s.bias = {{0.0, 0.0, 0.0}};
    // Short entities separated by short gaps, so the three labels are about equally
    // common in the interior of a sequence.
    s.transition = {{-5.0, 4.0, -2.0,   // from B
                     1.0, -1.0, 1.0,    // from I
                     2.0, -8.0, -1.0}}; // from O
    // 12 symbols preferred by each label plus 12 ambiguous symbols shared by all.
    for (int i = 0; i < 48; ++i) s.vocabulary.push_back((i < 24 ? "Tok" : "tok") + std::to_string(i));
    s.emission.assign(3, Vector(48, 0.0));
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t v = 0; v < 48; ++v) {
        const bool own = v >= a * 12 && v < (a + 1) * 12;
        const bool shared = v >= 36;
        s.emission[a][v] = own ? 1.0 : (shared ? 0.3 : 0.05);
      }
    return s;
  }
  if (name == "skipchain") {
    s.structure = crf::StructureKind::skip_chain;
    s.labels = {{"O", "SPEAKER", "LOCATION"}};
    s.bias = {{0.0, 0.0, 0.0}};
    s.transition = {{1.5, -1.0, -1.0,    // from O
                     0.0, 1.5, -3.0,     // from SPEAKER
                     0.0, -3.0, 1.5}};   // from LOCATION
    // Lowercase filler, capitalized names, capitalized places; the "Amb" names are
    // used for both fields so only context or a repeated mention disambiguates them.
    for (int i = 0; i < 20; ++i) s.vocabulary.push_back("w" + std::to_string(i));
    for (int i = 0; i < 10; ++i) s.vocabulary.push_back("Name" + std::to_string(i));
    for (int i = 0; i < 10; ++i) s.vocabulary.push_back("Place" + std::to_string(i));
    for (int i = 0; i < 10; ++i) s.vocabulary.push_back("Amb" + std::to_string(i));
    const std::size_t v = s.vocabulary.size();
    s.emission.assign(3, Vector(v, 0.0));
    for (std::size_t k = 0; k < v; ++k) {
      const bool filler = k < 20, nm = k >= 20 && k < 30, pl = k >= 30 && k < 40, amb = k >= 40;
      s.emission[0][k] = filler ? 1.0 : (amb ? 0.1 : 0.02);
      s.emission[1][k] = nm ? 0.6 : (amb ? 0.6 : 0.05);
      s.emission[2][k] = pl ? 0.6 : (amb ? 0.6 : 0.05);
    }
    s.repeat_probability = 0.6;
    s.repeat_labels = {"SPEAKER", "LOCATION"};
    return s;
  }
  if (name == "factorial") {
    s.structure = crf::StructureKind::factorial;
    s.labels = {{"DT", "NN", "VB"}, {"B-NP", "I-NP", "O"}};
    s.bias = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    s.transition = {{-2.0, 2.0, -0.5,  // DT ->
                     -0.5, 0.5, 1.0,   // NN ->
                     1.0, 0.0, -1.0},  // VB ->
                    {-2.0, 2.0, 0.0,   // B-NP ->
                     -1.0, 1.0, 0.5,   // I-NP ->
                     0.5, -6.0, 0.5}}; // O ->
    s.cotemporal = {2.0, -2.0, -2.0,   // DT x (B, I, O)
                    0.0, 1.0, -1.0,    // NN
                    -2.0, -2.0, 2.0};  // VB
    for (int i = 0; i < 30; ++i) s.vocabulary.push_back("t" + std::to_string(i));
    s.emission.assign(3, Vector(30, 0.0));
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t k = 0; k < 30; ++k) s.emission[a][k] = (k >= a * 8 && k < (a + 1) * 8) ? 1.0 : 0.15;
    return s;
  }
  throw std::invalid_argument("unknown synthetic preset '" + name + "' (expected chain, skipchain or factorial)");
}

// Parameter file: one table per line, `key<space>values...`:
//   structure chain|skipchain|factorial
//   labels <level> <names...>
//   bias <level> <values...>
//   transition <level> <row-major values...>
//   cotemporal <values...>
//   vocabulary <tokens...>
//   emission <label index> <weights...>
//   repeat <probability> <label names...>
inline void write_synthetic_spec(std::ostream& out, const SyntheticSpec& s) {
  auto join = [&](const auto& xs) {
    for (const auto& x : xs) {
      if constexpr (std::is_same_v<std::decay_t<decltype(x)>, double>)
        out << ' ' << crf::format_double(x);
      else
        out << ' ' << x;
    }
    out << '\n';
  };
  out << "structure " << crf::to_string(s.structure) << '\n';
  for (int k = 0; k < s.levels(); ++k) {
    out << "labels " << k;
    join(s.labels[static_cast<std::size_t>(k)]);
  }
  for (int k = 0; k < s.levels(); ++k) {
    out << "bias " << k;
    join(s.bias[static_cast<std::size_t>(k)]);
    out << "transition " << k;
    join(s.transition[static_cast<std::size_t>(k)]);
  }
  if (!s.cotemporal.empty()) {
    out << "cotemporal";
    join(s.cotemporal);
  }
  out << "vocabulary";
  join(s.vocabulary);
  for (std::size_t a = 0; a < s.emission.size(); ++a) {
    out << "emission " << a;
    join(s.emission[a]);
  }
  if (s.repeat_probability > 0.0) {
    out << "repeat " << crf::format_double(s.repeat_probability);
    join(s.repeat_labels);
  }
}

inline SyntheticSpec read_synthetic_spec(std::istream& in, const std::string& source = "<stream>") {
  SyntheticSpec s;
  std::string line;
  std::size_t lineno = 0;
  auto level_slot = [](auto& vec, std::size_t k) -> auto& {
    if (vec.size() <= k) vec.resize(k + 1);
    return vec[k];
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key.rfind("#", 0) == 0) continue;
    std::vector<std::string> f;
    for (std::string w; ss >> w;) f.push_back(w);
    auto fail = [&](const std::string& why) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + why);
    };
    auto numbers = [&](std::size_t from) {
      Vector v;
      for (std::size_t i = from; i < f.size(); ++i) v.push_back(crf::parse_double(f[i]));
      return v;
    };
    auto index = [&]() -> std::size_t {
      if (f.empty()) fail("missing index");
      return static_cast<std::size_t>(std::stoul(f[0]));
    };
    if (key == "structure") {
      if (f.size() != 1) fail("expected one structure name");
      s.structure = crf::parse_structure(f[0]);
    } else if (key == "labels") {
      level_slot(s.labels, index()).assign(f.begin() + 1, f.end());
    } else if (key == "bias") {
      level_slot(s.bias, index()) = numbers(1);
    } else if (key == "transition") {
      level_slot(s.transition, index()) = numbers(1);
    } else if (key == "cotemporal") {
      s.cotemporal = numbers(0);
    } else if (key == "vocabulary") {
      s.vocabulary = f;
    } else if (key == "emission") {
      level_slot(s.emission, index()) = numbers(1);
    } else if (key == "repeat") {
      if (f.empty()) fail("missing repeat probability");
      s.repeat_probability = crf::parse_double(f[0]);
      s.repeat_labels.assign(f.begin() + 1, f.end());
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Scoring

struct TypeCounts {
  std::size_t correct = 0, predicted = 0, gold = 0;
};

struct ChunkScore {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t correct = 0, predicted = 0, gold = 0;
  std::map<std::string, TypeCounts> per_type;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline void finish_score(ChunkScore& s) {
  s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
  s.f1 = f1_score(s.precision, s.recall);
}

struct Chunk {
  std::string type;
  std::size_t begin = 0, end = 0;  // [begin, end)
  auto operator<=>(const Chunk&) const = default;
};

/// Maximal BIO spans. An I- tag that does not continue an open chunk of the same type
/// starts a new chunk; labels without a B-/I- prefix are outside.
inline std::vector<Chunk> extract_chunks(const std::vector<std::string>& labels) {
  std::vector<Chunk> out;
  bool open = false;
  Chunk cur;
  auto close = [&](std::size_t t) {
    if (open) {
      cur.end = t;
      out.push_back(cur);
    }
    open = false;
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const std::string& l = labels[t];
    const bool b = l.rfind("B-", 0) == 0, i = l.rfind("I-", 0) == 0;
    if (i && open && cur.type == l.substr(2)) continue;
    close(t);
    if (b || i) {
      open = true;
      cur.type = l.substr(2);
      cur.begin = t;
    }
  }
  close(labels.size());
  return out;
}

using LabelSequences = std::vector<std::vector<std::string>>;

inline void check_aligned(const LabelSequences& gold, const LabelSequences& pred) {
  if (gold.size() != pred.size()) throw DataError("gold and predicted instance counts differ");
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i].size() != pred[i].size())
      throw DataError("gold and predicted lengths differ in instance " + std::to_string(i));
}

inline ChunkScore chunk_f1(const LabelSequences& gold, const LabelSequences& pred) {
  check_aligned(gold, pred);
  ChunkScore s;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = extract_chunks(gold[i]);
    const auto p = extract_chunks(pred[i]);
    const std::set<Chunk> gset(g.begin(), g.end());
    for (const Chunk& c : g) ++s.per_type[c.type].gold;
    for (const Chunk& c : p) {
      ++s.per_type[c.type].predicted;
      if (gset.count(c)) {
        ++s.per_type[c.type].correct;
        ++s.correct;
      }
    }
    s.gold += g.size();
    s.predicted += p.size();
  }
  finish_score(s);
  return s;
}

/// Micro-averaged per-token precision/recall/F1 over a set of labels: a token is
/// predicted (gold) when its predicted (gold) label is in the set, correct when both agree.
inline ChunkScore token_f1(const LabelSequences& gold, const LabelSequences& pred,
                           const std::vector<std::string>& targets) {
  check_aligned(gold, pred);
  const std::set<std::string> in(targets.begin(), targets.end());
  ChunkScore s;
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      const bool g = in.count(gold[i][t]) > 0, p = in.count(pred[i][t]) > 0;
      s.gold += g;
      s.predicted += p;
      s.correct += g && p && gold[i][t] == pred[i][t];
    }
  finish_score(s);
  return s;
}

inline ChunkScore token_f1(const LabelSequences& gold, const LabelSequences& pred, const std::string& target) {
  return token_f1(gold, pred, std::vector<std::string>{target});
}

inline double token_accuracy(const LabelSequences& gold, const LabelSequences& pred) {
  check_aligned(gold, pred);
  std::size_t right = 0, total = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      right += gold[i][t] == pred[i][t];
      ++total;
    }
  return total ? static_cast<double>(right) / static_cast<double>(total) : 0.0;
}

}  // namespace piecewise::data
