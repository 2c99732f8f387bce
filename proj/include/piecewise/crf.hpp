#pragma once

// Conditional models over label sequences. A CrfModel owns label alphabets,
// feature templates and a weight vector; `unroll` turns one input into a
// FactorGraph whose tabular log-potentials are sums of tied feature weights.
//
// Weights are laid out in blocks, one per factor role (unary per level,
// transition per level, cotemporal, skip). Within a block every observation
// predicate owns one weight per label configuration of the factor, so a
// predicate firing on a factor contributes the same block row to every table
// entry and the Lambda-space gradient is a plain sum over occurrences.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "piecewise/core.hpp"
#include "piecewise/graph.hpp"
#include "piecewise/inference.hpp"
#include "piecewise/objectives.hpp"

namespace piecewise::crf {

/// Bijective string <-> index map. Lookups of unknown strings return -1.
class Alphabet {
 public:
  int add(const std::string& s) {
    if (auto it = index_.find(s); it != index_.end()) return it->second;
    if (frozen_) return -1;
    const int id = static_cast<int>(names_.size());
    index_.emplace(s, id);
    names_.push_back(s);
    return id;
  }
  int lookup(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? -1 : it->second;
  }
  const std::string& name(int i) const { return names_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return names_.size(); }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  const std::vector<std::string>& names() const { return names_; }
  bool operator==(const Alphabet& o) const { return names_ == o.names_; }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> names_;
  bool frozen_ = false;
};

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::string>> attributes;  // per token, one entry per attribute column

  std::size_t size() const { return tokens.size(); }
};

/// Input plus gold label indices, labels[level][position].
struct LabeledSequence {
  TokenSequence x;
  std::vector<std::vector<int>> labels;
};

using Lexicons = std::map<std::string, std::set<std::string>>;

enum class StructureKind { linear_chain, factorial, skip_chain };

inline std::string to_string(StructureKind k) {
  switch (k) {
    case StructureKind::linear_chain: return "chain";
    case StructureKind::factorial: return "factorial";
    case StructureKind::skip_chain: return "skipchain";
  }
  return "?";
}

inline StructureKind parse_structure(const std::string& s) {
  if (s == "chain") return StructureKind::linear_chain;
  if (s == "factorial") return StructureKind::factorial;
  if (s == "skipchain") return StructureKind::skip_chain;
  throw std::invalid_argument("unknown structure '" + s + "' (expected chain, factorial or skipchain)");
}

inline int structure_levels(StructureKind k) { return k == StructureKind::factorial ? 2 : 1; }

// ---------------------------------------------------------------------------
// Structures

enum class FactorRole { unary, transition, cotemporal, skip };

/// Where an unrolled factor sits: its role, label level and the positions it joins.
struct FactorSlot {
  FactorRole role = FactorRole::unary;
  int level = 0;
  int first = 0;
  int second = -1;
};

/// Topology of one unrolled label graph, before any parameters.
struct Structure {
  std::vector<int> cardinalities;
  std::vector<std::vector<int>> scopes;
  std::vector<FactorSlot> slots;

  std::size_t pairwise_count() const {
    return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(),
                                                  [](const FactorSlot& s) { return s.role != FactorRole::unary; }));
  }
  std::size_t unary_count() const { return slots.size() - pairwise_count(); }
  FactorGraph graph() const { return FactorGraph(cardinalities, scopes); }
};

namespace detail {

inline void append_chain(Structure& s, int n, int level, int var_offset) {
  for (int t = 0; t < n; ++t) {
    s.scopes.push_back({var_offset + t});
    s.slots.push_back({FactorRole::unary, level, t, -1});
  }
  for (int t = 0; t + 1 < n; ++t) {
    s.scopes.push_back({var_offset + t, var_offset + t + 1});
    s.slots.push_back({FactorRole::transition, level, t, t + 1});
  }
}

}  // namespace detail

/// n unary factors followed by n-1 transition factors over positions 0..n-1.
inline Structure build_linear_chain(int n, int label_count) {
  if (n < 1) throw std::invalid_argument("sequence length must be >= 1");
  Structure s;
  s.cardinalities.assign(static_cast<std::size_t>(n), label_count);
  detail::append_chain(s, n, 0, 0);
  return s;
}

/// Two stacked chains (variables level*n + t) plus one cotemporal factor per position.
inline Structure build_factorial(int n, int labels_level0, int labels_level1) {
  if (n < 1) throw std::invalid_argument("sequence length must be >= 1");
  Structure s;
  s.cardinalities.assign(static_cast<std::size_t>(n), labels_level0);
  s.cardinalities.insert(s.cardinalities.end(), static_cast<std::size_t>(n), labels_level1);
  detail::append_chain(s, n, 0, 0);
  detail::append_chain(s, n, 1, n);
  for (int t = 0; t < n; ++t) {
    s.scopes.push_back({t, n + t});
    s.slots.push_back({FactorRole::cotemporal, 0, t, t});
  }
  return s;
}

/// First character is an ASCII uppercase letter.
inline bool is_capitalized(const std::string& token) {
  return !token.empty() && std::isupper(static_cast<unsigned char>(token.front()));
}

/// All pairs i < j whose tokens are identical and capitalized, in lexicographic order.
inline std::vector<std::pair<int, int>> skip_pairs(const std::vector<std::string>& tokens) {
  std::map<std::string, std::vector<int>> positions;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (is_capitalized(tokens[i])) positions[tokens[i]].push_back(static_cast<int>(i));
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [tok, pos] : positions)
    for (std::size_t a = 0; a < pos.size(); ++a)
      for (std::size_t b = a + 1; b < pos.size(); ++b) pairs.emplace_back(pos[a], pos[b]);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

/// Linear chain plus one skip factor per pair of identical capitalized tokens.
inline Structure build_skip_chain(const TokenSequence& x, int label_count) {
  Structure s = build_linear_chain(static_cast<int>(x.size()), label_count);
  for (const auto& [i, j] : skip_pairs(x.tokens)) {
    s.scopes.push_back({i, j});
    s.slots.push_back({FactorRole::skip, 0, i, j});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Feature templates

/// Observation predicates for a unary factor at one position.
struct FeatureTemplate {
  std::string name;
  std::function<void(const TokenSequence&, int, const Lexicons&, std::vector<std::string>&)> extract;
};

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline const std::vector<FeatureTemplate>& template_registry() {
  static const std::vector<FeatureTemplate> registry = {
      {"bias", [](const TokenSequence&, int, const Lexicons&, std::vector<std::string>& out) { out.push_back("bias"); }},
      {"word",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         out.push_back("w=" + x.tokens[static_cast<std::size_t>(t)]);
       }},
      {"lower",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         out.push_back("lw=" + lowercase(x.tokens[static_cast<std::size_t>(t)]));
       }},
      {"cap",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         if (is_capitalized(x.tokens[static_cast<std::size_t>(t)])) out.push_back("cap");
       }},
      {"prefix3",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         const auto& w = x.tokens[static_cast<std::size_t>(t)];
         out.push_back("p3=" + w.substr(0, 3));
       }},
      {"suffix3",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         const auto& w = x.tokens[static_cast<std::size_t>(t)];
         out.push_back("s3=" + (w.size() > 3 ? w.substr(w.size() - 3) : w));
       }},
      {"attr",
       [](const TokenSequence& x, int t, const Lexicons&, std::vector<std::string>& out) {
         if (x.attributes.empty()) return;
         const auto& attrs = x.attributes[static_cast<std::size_t>(t)];
         for (std::size_t j = 0; j < attrs.size(); ++j) out.push_back("a" + std::to_string(j) + "=" + attrs[j]);
       }},
      {"lexicon",
       [](const TokenSequence& x, int t, const Lexicons& lex, std::vector<std::string>& out) {
         const auto& w = x.tokens[static_cast<std::size_t>(t)];
         const auto lw = lowercase(w);
         for (const auto& [name, entries] : lex)
           if (entries.count(w) || entries.count(lw)) out.push_back("lex=" + name);
       }},
  };
  return registry;
}

inline const FeatureTemplate& find_template(const std::string& name) {
  for (const auto& t : template_registry())
    if (t.name == name) return t;
  throw std::invalid_argument("unknown feature template '" + name + "'");
}

inline std::vector<std::string> default_templates() {
  return {"bias", "word", "lower", "cap", "prefix3", "suffix3", "attr", "lexicon"};
}

// ---------------------------------------------------------------------------
// Model

/// One weight block: predicates x label configurations for a factor role.
struct FeatureBlock {
  std::string key;  // U<level>, T<level>, C or S
  std::size_t configs = 0;
  Alphabet predicates;
  std::size_t offset = 0;
};

class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(StructureKind structure, std::vector<std::string> templates = default_templates())
      : structure_(structure), templates_(std::move(templates)) {
    for (const auto& t : templates_) find_template(t);
    labels_.resize(static_cast<std::size_t>(structure_levels(structure_)));
  }

  StructureKind structure() const { return structure_; }
  int levels() const { return static_cast<int>(labels_.size()); }
  const Alphabet& labels(int level = 0) const { return labels_.at(static_cast<std::size_t>(level)); }
  Alphabet& labels(int level = 0) { return labels_.at(static_cast<std::size_t>(level)); }
  const std::vector<std::string>& templates() const { return templates_; }
  const Lexicons& lexicons() const { return lexicons_; }
  void set_lexicons(Lexicons lex) { lexicons_ = std::move(lex); }

  const std::vector<FeatureBlock>& blocks() const { return blocks_; }
  std::size_t dimension() const { return weights_.size(); }
  bool frozen() const { return frozen_; }

  const Vector& weights() const { return weights_; }
  void set_weights(Vector w) {
    if (w.size() != weights_.size()) throw DimensionError("weight vector length does not match model dimension");
    if (!all_finite(w)) throw NumericalError("model weights must be finite");
    weights_ = std::move(w);
  }

  /// Adds gold labels of one level to the label alphabet (training-time scan only).
  std::vector<int> encode_labels(int level, const std::vector<std::string>& names) {
    std::vector<int> out;
    out.reserve(names.size());
    for (const auto& s : names) {
      const int id = labels(level).add(s);
      if (id < 0) throw DataError("unknown label '" + s + "'");
      out.push_back(id);
    }
    return out;
  }

  /// Maps label names through a frozen alphabet; unknown labels are a DataError.
  std::vector<int> lookup_labels(int level, const std::vector<std::string>& names) const {
    std::vector<int> out;
    out.reserve(names.size());
    for (const auto& s : names) {
      const int id = labels(level).lookup(s);
      if (id < 0) throw DataError("label '" + s + "' is not in the model's label alphabet");
      out.push_back(id);
    }
    return out;
  }

  /// Label topology of the unrolled graph for one input.
  Structure structure_for(const TokenSequence& x) const {
    const int n = static_cast<int>(x.size());
    switch (structure_) {
      case StructureKind::linear_chain: return build_linear_chain(n, label_count(0));
      case StructureKind::factorial: return build_factorial(n, label_count(0), label_count(1));
      case StructureKind::skip_chain: return build_skip_chain(x, label_count(0));
    }
    throw std::logic_error("unreachable");
  }

  /// Observation predicates active on a factor.
  void predicates(const TokenSequence& x, const FactorSlot& slot, std::vector<std::string>& out) const {
    out.clear();
    switch (slot.role) {
      case FactorRole::unary:
        for (const auto& name : templates_) find_template(name).extract(x, slot.first, lexicons_, out);
        break;
      case FactorRole::transition:
      case FactorRole::cotemporal: out.push_back("bias"); break;
      case FactorRole::skip:
        out.push_back("bias");
        out.push_back("w=" + x.tokens[static_cast<std::size_t>(slot.first)] + "&" +
                      x.tokens[static_cast<std::size_t>(slot.second)]);
        break;
    }
  }

  static std::string block_key(const FactorSlot& slot) {
    switch (slot.role) {
      case FactorRole::unary: return "U" + std::to_string(slot.level);
      case FactorRole::transition: return "T" + std::to_string(slot.level);
      case FactorRole::cotemporal: return "C";
      case FactorRole::skip: return "S";
    }
    return "?";
  }

  /// Grows the label and predicate alphabets from training data, then freezes them and
  /// sizes the weight vector (all zeros). Returns the encoded dataset.
  std::vector<LabeledSequence> scan(const std::vector<TokenSequence>& inputs,
                                    const std::vector<std::vector<std::vector<std::string>>>& gold) {
    if (frozen_) throw std::logic_error("model alphabets are already frozen");
    if (inputs.size() != gold.size()) throw DataError("inputs and gold labels differ in count");
    std::vector<LabeledSequence> data;
    data.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (gold[i].size() != labels_.size()) throw DataError("gold labels have the wrong number of levels");
      LabeledSequence ls{inputs[i], {}};
      for (int k = 0; k < levels(); ++k) {
        if (gold[i][static_cast<std::size_t>(k)].size() != inputs[i].size())
          throw DataError("gold label count differs from token count in instance " + std::to_string(i));
        ls.labels.push_back(encode_labels(k, gold[i][static_cast<std::size_t>(k)]));
      }
      data.push_back(std::move(ls));
    }
    for (auto& a : labels_) a.freeze();
    create_blocks();
    std::vector<std::string> preds;
    for (const auto& ls : data) {
      const Structure s = structure_for(ls.x);
      for (const auto& slot : s.slots) {
        predicates(ls.x, slot, preds);
        FeatureBlock& b = block(block_key(slot));
        for (const auto& p : preds) b.predicates.add(p);
      }
    }
    finalize_blocks();
    return data;
  }

  /// Re-encodes inputs and gold labels against the frozen alphabets (test-time data).
  std::vector<LabeledSequence> encode(const std::vector<TokenSequence>& inputs,
                                      const std::vector<std::vector<std::vector<std::string>>>& gold) const {
    std::vector<LabeledSequence> data;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      LabeledSequence ls{inputs[i], {}};
      for (int k = 0; k < levels(); ++k) ls.labels.push_back(lookup_labels(k, gold[i][static_cast<std::size_t>(k)]));
      data.push_back(std::move(ls));
    }
    return data;
  }

  /// "<block>/<label config>/<predicate>", e.g. "T0/B-PER+I-PER/bias".
  std::string feature_name(const FeatureBlock& b, std::size_t pred, std::size_t config) const {
    return b.key + "/" + config_name(b, config) + "/" + b.predicates.name(static_cast<int>(pred));
  }

  std::string config_name(const FeatureBlock& b, std::size_t config) const {
    const auto [first, second] = block_levels(b.key);
    if (second < 0) return labels(first).name(static_cast<int>(config));
    const std::size_t n2 = labels(second).size();
    return labels(first).name(static_cast<int>(config / n2)) + "+" + labels(second).name(static_cast<int>(config % n2));
  }

  /// Copies weights of every feature whose name also exists in `other`.
  std::size_t warm_start_from(const CrfModel& other) {
    std::unordered_map<std::string, double> source;
    for (const auto& b : other.blocks_)
      for (std::size_t p = 0; p < b.predicates.size(); ++p)
        for (std::size_t c = 0; c < b.configs; ++c)
          source.emplace(other.feature_name(b, p, c), other.weights_[b.offset + p * b.configs + c]);
    std::size_t copied = 0;
    for (const auto& b : blocks_)
      for (std::size_t p = 0; p < b.predicates.size(); ++p)
        for (std::size_t c = 0; c < b.configs; ++c)
          if (auto it = source.find(feature_name(b, p, c)); it != source.end()) {
            weights_[b.offset + p * b.configs + c] = it->second;
            ++copied;
          }
    return copied;
  }

  const FeatureBlock* find_block(const std::string& key) const {
    for (const auto& b : blocks_)
      if (b.key == key) return &b;
    return nullptr;
  }

  void save(std::ostream& out) const;
  static CrfModel load(std::istream& in);

 private:
  int label_count(int level) const { return static_cast<int>(labels(level).size()); }

  /// (first level, second level or -1) of the label configuration a block indexes.
  std::pair<int, int> block_levels(const std::string& key) const {
    if (key == "C") return {0, 1};
    if (key == "S") return {0, 0};
    const int level = std::stoi(key.substr(1));
    return key[0] == 'T' ? std::pair{level, level} : std::pair{level, -1};
  }

  FeatureBlock& block(const std::string& key) {
    for (auto& b : blocks_)
      if (b.key == key) return b;
    throw std::logic_error("no feature block " + key);
  }

  void create_blocks() {
    blocks_.clear();
    auto add = [&](std::string key) {
      FeatureBlock b;
      b.key = std::move(key);
      const auto [first, second] = block_levels(b.key);
      b.configs = labels(first).size() * (second < 0 ? 1 : labels(second).size());
      blocks_.push_back(std::move(b));
    };
    for (int k = 0; k < levels(); ++k) add("U" + std::to_string(k));
    for (int k = 0; k < levels(); ++k) add("T" + std::to_string(k));
    if (structure_ == StructureKind::factorial) add("C");
    if (structure_ == StructureKind::skip_chain) add("S");
  }

  void finalize_blocks() {
    std::size_t offset = 0;
    for (auto& b : blocks_) {
      b.predicates.freeze();
      b.offset = offset;
      offset += b.predicates.size() * b.configs;
    }
    weights_.assign(offset, 0.0);
    frozen_ = true;
  }

  StructureKind structure_ = StructureKind::linear_chain;
  std::vector<Alphabet> labels_;
  std::vector<std::string> templates_;
  Lexicons lexicons_;
  std::vector<FeatureBlock> blocks_;
  Vector weights_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Unrolling

/// The MRF a model induces on one input.
struct UnrolledInstance {
  FactorGraph graph;
  std::vector<FactorSlot> slots;
  std::vector<std::vector<std::size_t>> feature_rows;  // per factor: weight offsets of active predicates
  Vector theta;
  Assignment gold;  // empty when unlabeled
};

/// theta[f, c] = sum over active predicates p of weights[row(p) + c].
inline void compute_theta(const UnrolledInstance& u, std::span<const double> weights, Vector& theta) {
  theta.assign(u.graph.dimension(), 0.0);
  for (const Factor& f : u.graph.factors())
    for (std::size_t row : u.feature_rows[static_cast<std::size_t>(f.id)])
      for (std::size_t c = 0; c < f.stat_count; ++c) theta[f.stat_offset + c] += weights[row + c];
}

/// Accumulates a theta-space gradient into Lambda space through the tied rows.
inline void pull_back(const UnrolledInstance& u, std::span<const double> theta_grad, std::span<double> lambda_grad) {
  for (const Factor& f : u.graph.factors())
    for (std::size_t row : u.feature_rows[static_cast<std::size_t>(f.id)])
      for (std::size_t c = 0; c < f.stat_count; ++c) lambda_grad[row + c] += theta_grad[f.stat_offset + c];
}

inline UnrolledInstance unroll(const CrfModel& model, const TokenSequence& x,
                               const std::vector<std::vector<int>>* gold = nullptr) {
  if (x.size() == 0) throw DataError("cannot unroll an empty sequence");
  if (!model.frozen()) throw std::logic_error("model alphabets must be scanned before unrolling");
  const Structure s = model.structure_for(x);
  UnrolledInstance u;
  u.graph = s.graph();
  u.slots = s.slots;
  u.feature_rows.resize(s.slots.size());
  std::vector<std::string> preds;
  for (std::size_t f = 0; f < s.slots.size(); ++f) {
    const FeatureBlock* b = model.find_block(CrfModel::block_key(s.slots[f]));
    model.predicates(x, s.slots[f], preds);
    for (const auto& p : preds) {
      const int id = b->predicates.lookup(p);
      if (id >= 0) u.feature_rows[f].push_back(b->offset + static_cast<std::size_t>(id) * b->configs);
    }
  }
  compute_theta(u, model.weights(), u.theta);
  if (gold) {
    const std::size_t n = x.size();
    u.gold.assign(u.graph.num_variables(), 0);
    for (std::size_t k = 0; k < gold->size(); ++k)
      for (std::size_t t = 0; t < n; ++t) {
        const int y = (*gold)[k].at(t);
        if (y < 0 || static_cast<std::size_t>(y) >= model.labels(static_cast<int>(k)).size())
          throw DataError("gold label index out of range");
        u.gold[k * n + t] = y;
      }
  }
  return u;
}

/// Max-product decoding of one input; returns labels[level][position].
inline std::vector<std::vector<int>> decode(const CrfModel& model, const TokenSequence& x,
                                            const BpSettings& settings = {}) {
  const UnrolledInstance u = unroll(model, x);
  const Assignment a = max_product_decode(u.graph, u.theta, settings);
  const std::size_t n = x.size();
  std::vector<std::vector<int>> out(static_cast<std::size_t>(model.levels()));
  for (std::size_t k = 0; k < out.size(); ++k) out[k].assign(a.begin() + static_cast<std::ptrdiff_t>(k * n),
                                                             a.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
  return out;
}

// ---------------------------------------------------------------------------
// Conditional training objective

struct TrainingOptions {
  ObjectiveKind objective = ObjectiveKind::piecewise;
  InferenceOptions inference{};
  std::optional<PriorSpec> prior = PriorSpec{};
  int threads = 1;
};

/// Lambda-space objective over a labeled dataset. Unrolled graphs are built once; each
/// evaluation recomputes the tied log-potentials, evaluates the selected theta-space
/// objective per instance, pulls the gradients back in instance order and applies the
/// prior once.
class ConditionalObjective {
 public:
  ConditionalObjective(const CrfModel& model, const std::vector<LabeledSequence>& data, TrainingOptions options)
      : dimension_(model.dimension()), options_(std::move(options)) {
    if (data.empty()) throw DataError("training set is empty");
    instances_.reserve(data.size());
    for (const auto& ls : data) instances_.push_back(unroll(model, ls.x, &ls.labels));
  }

  std::size_t dimension() const { return dimension_; }
  const std::vector<UnrolledInstance>& instances() const { return instances_; }

  ObjectiveResult operator()(std::span<const double> lambda) const {
    if (lambda.size() != dimension_) throw DimensionError("weight vector length does not match model dimension");
    std::vector<ObjectiveResult> parts(instances_.size());
    parallel_for(instances_.size(), options_.threads, [&](std::size_t i) {
      const UnrolledInstance& u = instances_[i];
      Vector theta;
      compute_theta(u, lambda, theta);
      const Assignment* gold = &u.gold;
      parts[i] = evaluate_objective(options_.objective, u.graph, theta, std::span<const Assignment>(gold, 1),
                                    options_.inference);
    });
    ObjectiveResult total;
    total.gradient.assign(dimension_, 0.0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      total.value += parts[i].value;
      pull_back(instances_[i], parts[i].gradient, total.gradient);
    }
    if (options_.prior) total = apply_gaussian_prior(std::move(total), lambda, *options_.prior);
    return total;
  }

 private:
  std::size_t dimension_;
  TrainingOptions options_;
  std::vector<UnrolledInstance> instances_;
};

inline ObjectiveResult conditional_objective(const CrfModel& model, const std::vector<LabeledSequence>& data,
                                             const TrainingOptions& options) {
  return ConditionalObjective(model, data, options)(model.weights());
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr const char* kModelMagic = "piecewise-crf-model";
inline constexpr int kModelVersion = 1;

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw DataError("malformed number '" + s + "'");
  return x;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

inline void CrfModel::save(std::ostream& out) const {
  if (!frozen_) throw std::logic_error("cannot save a model before its alphabets are scanned");
  out << kModelMagic << '\t' << kModelVersion << '\n';
  out << "structure\t" << to_string(structure_) << '\n';
  for (int k = 0; k < levels(); ++k) {
    out << "labels\t" << k;
    for (const auto& name : labels(k).names()) out << '\t' << name;
    out << '\n';
  }
  out << "templates";
  for (const auto& t : templates_) out << '\t' << t;
  out << '\n';
  for (const auto& [name, entries] : lexicons_)
    for (const auto& e : entries) out << "lexicon\t" << name << '\t' << e << '\n';
  for (const auto& b : blocks_) {
    out << "block\t" << b.key << '\t' << b.predicates.size() << '\t' << b.configs << '\n';
    for (std::size_t p = 0; p < b.predicates.size(); ++p)
      for (std::size_t c = 0; c < b.configs; ++c)
        out << feature_name(b, p, c) << '\t' << format_double(weights_[b.offset + p * b.configs + c]) << '\n';
  }
  out << "end\n";
}

inline CrfModel CrfModel::load(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> std::vector<std::string> {
    if (!std::getline(in, line)) throw DataError("model file ends unexpectedly after line " + std::to_string(lineno));
    ++lineno;
    return split_tabs(line);
  };
  auto fail = [&](const std::string& why) {
    throw DataError("model file line " + std::to_string(lineno) + ": " + why);
  };

  auto fields = next();
  if (fields.size() != 2 || fields[0] != kModelMagic) fail("not a model file");
  if (fields[1] != std::to_string(kModelVersion)) fail("unsupported model version " + fields[1]);
  fields = next();
  if (fields.size() != 2 || fields[0] != "structure") fail("expected structure");
  CrfModel m;
  m.structure_ = parse_structure(fields[1]);
  m.labels_.resize(static_cast<std::size_t>(structure_levels(m.structure_)));
  for (int k = 0; k < m.levels(); ++k) {
    fields = next();
    if (fields.size() < 2 || fields[0] != "labels" || fields[1] != std::to_string(k)) fail("expected labels " + std::to_string(k));
    for (std::size_t i = 2; i < fields.size(); ++i) m.labels(k).add(fields[i]);
    m.labels(k).freeze();
  }
  fields = next();
  if (fields.empty() || fields[0] != "templates") fail("expected templates");
  m.templates_.assign(fields.begin() + 1, fields.end());
  for (const auto& t : m.templates_) find_template(t);

  m.create_blocks();
  std::vector<std::pair<std::size_t, Vector>> block_weights;
  std::size_t next_block = 0;
  for (;;) {
    fields = next();
    if (fields[0] == "end") break;
    if (fields[0] == "lexicon") {
      if (fields.size() != 3) fail("malformed lexicon line");
      m.lexicons_[fields[1]].insert(fields[2]);
      continue;
    }
    if (fields[0] != "block" || fields.size() != 4) fail("expected block header");
    if (next_block >= m.blocks_.size() || m.blocks_[next_block].key != fields[1]) fail("unexpected block " + fields[1]);
    FeatureBlock& b = m.blocks_[next_block++];
    const std::size_t npred = std::stoul(fields[2]);
    if (std::stoul(fields[3]) != b.configs) fail("block " + b.key + " has the wrong configuration count");
    Vector w(npred * b.configs);
    for (std::size_t p = 0; p < npred; ++p)
      for (std::size_t c = 0; c < b.configs; ++c) {
        fields = next();
        if (fields.size() != 2) fail("expected name<TAB>weight");
        const std::string prefix = b.key + "/" + m.config_name(b, c) + "/";
        if (fields[0].compare(0, prefix.size(), prefix) != 0) fail("feature name does not match block layout");
        const std::string pred = fields[0].substr(prefix.size());
        if (c == 0) {
          if (b.predicates.add(pred) != static_cast<int>(p)) fail("duplicate predicate " + pred);
        } else if (b.predicates.lookup(pred) != static_cast<int>(p)) {
          fail("predicate order mismatch");
        }
        w[p * b.configs + c] = parse_double(fields[1]);
      }
    block_weights.emplace_back(next_block - 1, std::move(w));
  }
  if (next_block != m.blocks_.size()) fail("missing feature blocks");
  m.finalize_blocks();
  for (const auto& [bi, w] : block_weights)
    std::copy(w.begin(), w.end(), m.weights_.begin() + static_cast<std::ptrdiff_t>(m.blocks_[bi].offset));
  if (!all_finite(m.weights_)) throw DataError("model file contains non-finite weights");
  return m;
}

}  // namespace piecewise::crf
