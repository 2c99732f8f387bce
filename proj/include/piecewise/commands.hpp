#pragma once

// The five command-line operations (train, predict, eval, boundcheck, synth) as
// library functions over a flat RunConfig. Metrics go to `out` as `name<TAB>value`
// lines, progress and timing to `log`. Each returns a process exit code.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "piecewise/core.hpp"
#include "piecewise/crf.hpp"
#include "piecewise/data.hpp"
#include "piecewise/objectives.hpp"
#include "piecewise/optimizer.hpp"

namespace piecewise::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitNumerical = 2;

/// Invalid or incoherent option combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class PartitionKind { random, single, per_factor };

inline PartitionKind parse_partition(const std::string& s) {
  if (s == "random") return PartitionKind::random;
  if (s == "single") return PartitionKind::single;
  if (s == "per-factor") return PartitionKind::per_factor;
  throw ConfigError("unknown partition '" + s + "' (expected random, single or per-factor)");
}

inline InferenceKind parse_inference(const std::string& s) {
  if (s == "brute") return InferenceKind::brute;
  if (s == "tree") return InferenceKind::tree;
  if (s == "loopy") return InferenceKind::loopy;
  throw ConfigError("unknown inference '" + s + "' (expected brute, tree or loopy)");
}

struct RunConfig {
  std::string command;

  ObjectiveKind objective = ObjectiveKind::piecewise;
  crf::StructureKind structure = crf::StructureKind::linear_chain;
  InferenceKind inference = InferenceKind::tree;
  BpSettings bp;
  std::size_t state_cap = kDefaultStateCap;
  bool prior = true;
  double sigma2 = 10.0;
  OptimizerSettings optimizer;
  std::uint64_t seed = 1;
  int threads = 1;

  std::string train_path, test_path, model_path, output_path, init_model_path;
  std::string gold_path, predictions_path;
  std::vector<std::string> templates = crf::default_templates();
  std::vector<std::string> lexicons;  // NAME=path
  bool unlabeled = false;
  std::vector<std::string> target_labels;

  std::string preset = "chain", params_path, dump_params_path;
  std::size_t count = 100;
  int min_length = 5, max_length = 15;

  int trials = 1000, max_vars = 8, max_card = 3;
  double theta_range = 2.0;
  PartitionKind partition = PartitionKind::random;
  bool zero_theta = false;

  int levels() const { return crf::structure_levels(structure); }

  void validate() const {
    auto need = [&](const std::string& value, const char* flag) {
      if (value.empty()) throw ConfigError(command + " requires " + flag);
    };
    try {
      bp.validate();
      optimizer.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (prior && !(sigma2 > 0.0)) throw ConfigError("prior variance must be > 0");
    if (objective == ObjectiveKind::exact && inference == InferenceKind::tree &&
        structure != crf::StructureKind::linear_chain)
      throw ConfigError("exact training with tree inference needs an acyclic structure; " + to_string(structure) +
                        " graphs can contain cycles (use --inference loopy or brute)");
    for (const auto& t : templates) {
      try {
        crf::find_template(t);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    for (const auto& l : lexicons)
      if (l.find('=') == std::string::npos || l.front() == '=') throw ConfigError("lexicon must be NAME=path: " + l);
    if (command == "train") {
      need(train_path, "--train");
      need(model_path, "--model");
    } else if (command == "predict") {
      need(model_path, "--model");
      need(test_path, "--test");
      need(output_path, "--output");
    } else if (command == "eval") {
      need(predictions_path, "--predictions");
    } else if (command == "synth") {
      need(output_path, "--output");
      if (min_length < 1 || max_length < min_length) throw ConfigError("need 1 <= min-length <= max-length");
    } else if (command == "boundcheck") {
      if (trials < 0) throw ConfigError("trials must be >= 0");
      if (max_vars < 1 || max_card < 1) throw ConfigError("max-vars and max-card must be >= 1");
      if (!(theta_range >= 0.0)) throw ConfigError("theta range must be >= 0");
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
  }
};

namespace detail {

inline data::ColumnSchema labeled_schema(int levels) {
  data::ColumnSchema s;
  s.label_columns.clear();
  for (int k = levels; k > 0; --k) s.label_columns.push_back(-k);
  return s;
}

inline crf::Lexicons load_lexicons(const std::vector<std::string>& specs) {
  crf::Lexicons lex;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    const std::string name = spec.substr(0, eq), path = spec.substr(eq + 1);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon " + path);
    auto& entries = lex[name];
    for (std::string line; std::getline(in, line);) {
      std::istringstream ss(line);
      std::string word;
      if (ss >> word) entries.insert(word);
    }
  }
  return lex;
}

inline crf::CrfModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model " + path);
  return crf::CrfModel::load(in);
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out.flush()) throw DataError("failed writing " + path);
}

inline void metric(std::ostream& out, const std::string& name, double value) {
  out << name << '\t' << crf::format_double(value) << '\n';
}

inline void metric(std::ostream& out, const std::string& name, const std::string& value) {
  out << name << '\t' << value << '\n';
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// train

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto t0 = detail::Clock::now();
  const int levels = cfg.levels();
  const auto corpus = data::read_conll(cfg.train_path, detail::labeled_schema(levels));
  if (corpus.columns < levels + 1) throw DataError(cfg.train_path + ": too few columns for " + to_string(cfg.structure));

  crf::CrfModel model(cfg.structure, cfg.templates);
  model.set_lexicons(detail::load_lexicons(cfg.lexicons));
  const auto data = model.scan(corpus.inputs(), corpus.all_labels());
  log << "instances " << data.size() << ", features " << model.dimension() << '\n';
  if (!cfg.init_model_path.empty()) {
    const auto init = detail::load_model(cfg.init_model_path);
    log << "warm start: copied " << model.warm_start_from(init) << " weights from " << cfg.init_model_path << '\n';
  }

  crf::TrainingOptions opts;
  opts.objective = cfg.objective;
  opts.inference = InferenceOptions{cfg.inference, cfg.bp, cfg.state_cap};
  opts.prior = cfg.prior ? std::optional<PriorSpec>(PriorSpec{cfg.sigma2}) : std::nullopt;
  opts.threads = cfg.threads;
  const crf::ConditionalObjective objective(model, data, opts);

  double eval_seconds = 0.0;
  auto fn = [&](const Vector& lambda, Vector& grad) {
    const auto te = detail::Clock::now();
    auto r = objective(lambda);
    eval_seconds += detail::seconds_since(te);
    grad = std::move(r.gradient);
    return r.value;
  };
  auto progress = [&](const OptimizationTrace& t) {
    log << "iteration " << t.iterations << "\tvalue " << crf::format_double(t.values.back()) << "\tgradient "
        << crf::format_double(t.final_gradient_norm) << '\n';
  };

  OptimizationResult result;
  try {
    result = maximize(fn, model.weights(), cfg.optimizer, progress);
  } catch (const OptimizationError& e) {
    log << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  model.set_weights(result.theta);
  std::ostringstream text;
  model.save(text);
  detail::write_file(cfg.model_path, text.str());

  detail::metric(out, "objective", to_string(cfg.objective));
  detail::metric(out, "instances", static_cast<double>(data.size()));
  detail::metric(out, "features", static_cast<double>(model.dimension()));
  detail::metric(out, "iterations", static_cast<double>(result.trace.iterations));
  detail::metric(out, "evaluations", static_cast<double>(result.trace.evaluations));
  detail::metric(out, "converged", result.trace.converged ? 1.0 : 0.0);
  detail::metric(out, "final_value", result.trace.final_value);
  detail::metric(out, "final_gradient_norm", result.trace.final_gradient_norm);
  log << "objective_seconds\t" << eval_seconds << '\n' << "total_seconds\t" << detail::seconds_since(t0) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

inline int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto model = detail::load_model(cfg.model_path);
  const int levels = model.levels();
  data::ColumnSchema schema;
  if (cfg.unlabeled)
    schema.label_columns.clear();
  else
    schema = detail::labeled_schema(levels);
  const auto corpus = data::read_conll(cfg.test_path, schema);
  if (!cfg.unlabeled) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto gold = corpus.labels(i);
      for (int k = 0; k < levels; ++k) model.lookup_labels(k, gold[static_cast<std::size_t>(k)]);
    }
  }

  std::ostringstream text;
  std::size_t rows = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto y = crf::decode(model, corpus.input(i), cfg.bp);
    if (i) text << '\n';
    for (std::size_t t = 0; t < corpus.instances[i].size(); ++t, ++rows) {
      const auto& row = corpus.instances[i][t];
      for (std::size_t c = 0; c < row.size(); ++c) text << (c ? " " : "") << row[c];
      for (int k = 0; k < levels; ++k) text << ' ' << model.labels(k).name(y[static_cast<std::size_t>(k)][t]);
      text << '\n';
    }
  }
  detail::write_file(cfg.output_path, text.str());
  detail::metric(out, "instances", static_cast<double>(corpus.size()));
  detail::metric(out, "tokens", static_cast<double>(rows));
  log << "wrote " << cfg.output_path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

/// Gold and predicted label columns per level: the last `levels` columns of the
/// predictions file are predictions. Gold comes from `gold_path` (its last `levels`
/// columns) when given, otherwise from the `levels` columns just before the predictions.
inline std::pair<std::vector<data::LabelSequences>, std::vector<data::LabelSequences>> read_eval_columns(
    const RunConfig& cfg) {
  const int levels = cfg.levels();
  const bool separate = !cfg.gold_path.empty();
  data::ColumnSchema ps;
  ps.label_columns.clear();
  for (int k = separate ? levels : 2 * levels; k > 0; --k) ps.label_columns.push_back(-k);
  const auto pred_corpus = data::read_conll(cfg.predictions_path, ps);
  const int need = separate ? levels + 1 : 2 * levels + 1;
  if (pred_corpus.columns < need)
    throw DataError(cfg.predictions_path + ": expected at least " + std::to_string(need) +
                    " columns (word, gold and predicted labels)");

  std::vector<data::LabelSequences> gold(static_cast<std::size_t>(levels)), pred(gold.size());
  for (std::size_t i = 0; i < pred_corpus.size(); ++i) {
    const auto cols = pred_corpus.labels(i);
    for (std::size_t k = 0; k < gold.size(); ++k) {
      pred[k].push_back(cols[(separate ? 0 : gold.size()) + k]);
      if (!separate) gold[k].push_back(cols[k]);
    }
  }
  if (separate) {
    const auto gold_corpus = data::read_conll(cfg.gold_path, detail::labeled_schema(levels));
    if (gold_corpus.size() != pred_corpus.size())
      throw DataError("gold has " + std::to_string(gold_corpus.size()) + " instances, predictions have " +
                      std::to_string(pred_corpus.size()));
    for (std::size_t i = 0; i < gold_corpus.size(); ++i) {
      const auto cols = gold_corpus.labels(i);
      for (std::size_t k = 0; k < gold.size(); ++k) gold[k].push_back(cols[k]);
    }
  }
  return {gold, pred};
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto [gold, pred] = read_eval_columns(cfg);
  std::ostringstream text;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    data::check_aligned(gold[k], pred[k]);
    const std::string suffix = gold.size() > 1 ? "_level" + std::to_string(k) : "";
    std::set<std::string> names;
    bool bio = false;
    for (const auto* side : {&gold[k], &pred[k]})
      for (const auto& seq : *side)
        for (const auto& l : seq) {
          names.insert(l);
          bio = bio || l.rfind("B-", 0) == 0 || l.rfind("I-", 0) == 0;
        }
    detail::metric(text, "token_accuracy" + suffix, data::token_accuracy(gold[k], pred[k]));
    if (bio) {
      const auto s = data::chunk_f1(gold[k], pred[k]);
      detail::metric(text, "chunk_precision" + suffix, s.precision);
      detail::metric(text, "chunk_recall" + suffix, s.recall);
      detail::metric(text, "chunk_f1" + suffix, s.f1);
      for (const auto& [type, c] : s.per_type) {
        const double p = c.predicted ? static_cast<double>(c.correct) / static_cast<double>(c.predicted) : 0.0;
        const double r = c.gold ? static_cast<double>(c.correct) / static_cast<double>(c.gold) : 0.0;
        detail::metric(text, "chunk_f1" + suffix + "[" + type + "]", data::f1_score(p, r));
      }
    }
    std::vector<std::string> targets = cfg.target_labels;
    if (targets.empty() && !bio)
      for (const auto& n : names)
        if (n != "O") targets.push_back(n);
    for (const auto& target : targets) {
      if (gold.size() > 1 && !names.count(target)) continue;
      const auto s = data::token_f1(gold[k], pred[k], target);
      detail::metric(text, "token_precision" + suffix + "[" + target + "]", s.precision);
      detail::metric(text, "token_recall" + suffix + "[" + target + "]", s.recall);
      detail::metric(text, "token_f1" + suffix + "[" + target + "]", s.f1);
    }
    if (targets.size() > 1) {
      std::vector<std::string> present;
      for (const auto& target : targets)
        if (gold.size() == 1 || names.count(target)) present.push_back(target);
      const auto s = data::token_f1(gold[k], pred[k], present);
      detail::metric(text, "token_precision" + suffix, s.precision);
      detail::metric(text, "token_recall" + suffix, s.recall);
      detail::metric(text, "token_f1" + suffix, s.f1);
    }
  }
  out << text.str();
  if (!cfg.output_path.empty()) {
    detail::write_file(cfg.output_path, text.str());
    log << "wrote " << cfg.output_path << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// boundcheck

struct SlackStats {
  std::size_t trials = 0, violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  double mean_slack = 0.0;

  void add(const BoundCheck& c) {
    ++trials;
    violations += !c.holds;
    min_slack = std::min(min_slack, c.slack());
    mean_slack += (c.slack() - mean_slack) / static_cast<double>(trials);
  }
};

struct BoundReport {
  SlackStats piecewise, reweighted_uniform, reweighted_random;
  std::size_t violations() const {
    return piecewise.violations + reweighted_uniform.violations + reweighted_random.violations;
  }
};

/// Random factor graph with unary, pairwise and occasional ternary factors. Every
/// variable lies in at least one factor.
inline FactorGraph random_factor_graph(std::mt19937_64& rng, int max_vars, int max_card) {
  const int n = std::uniform_int_distribution<int>(1, max_vars)(rng);
  std::uniform_int_distribution<int> card(1, max_card), pick(0, n - 1), arity(1, 10);
  std::vector<int> cards(static_cast<std::size_t>(n));
  for (int& c : cards) c = card(rng);
  std::vector<std::vector<int>> scopes;
  const int factors = std::uniform_int_distribution<int>(1, 2 * n)(rng);
  for (int f = 0; f < factors; ++f) {
    const int a = arity(rng);
    const int want = std::min(n, a <= 3 ? 1 : (a <= 9 ? 2 : 3));
    std::vector<int> scope;
    while (static_cast<int>(scope.size()) < want) {
      const int v = pick(rng);
      if (std::find(scope.begin(), scope.end(), v) == scope.end()) scope.push_back(v);
    }
    scopes.push_back(std::move(scope));
  }
  std::vector<char> seen(cards.size(), 0);
  for (const auto& s : scopes)
    for (int v : s) seen[static_cast<std::size_t>(v)] = 1;
  for (int v = 0; v < n; ++v)
    if (!seen[static_cast<std::size_t>(v)]) scopes.push_back({v});
  return FactorGraph(cards, scopes);
}

inline PiecePartition random_pieces(const FactorGraph& g, std::mt19937_64& rng) {
  const int nf = static_cast<int>(g.num_factors());
  const int k = std::uniform_int_distribution<int>(1, nf)(rng);
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(k));
  std::uniform_int_distribution<int> b(0, k - 1);
  for (int f = 0; f < nf; ++f) buckets[static_cast<std::size_t>(b(rng))].push_back(f);
  PiecePartition p;
  for (auto& bucket : buckets)
    if (!bucket.empty()) p.pieces.push_back(std::move(bucket));
  return p;
}

/// Strictly positive weights summing to 1 (the last entry absorbs rounding).
inline Vector random_piece_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Vector w(n);
  double total = 0.0;
  for (double& x : w) total += (x = u(rng));
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < n; ++i) rest -= (w[i] /= total);
  w.back() = rest;
  return w;
}

inline BoundReport run_boundcheck(const RunConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  BoundReport report;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const FactorGraph g = random_factor_graph(rng, cfg.max_vars, cfg.max_card);
    Vector theta(g.dimension(), 0.0);
    if (!cfg.zero_theta) {
      std::uniform_real_distribution<double> u(-cfg.theta_range, cfg.theta_range);
      for (double& x : theta) x = u(rng);
    }
    PiecePartition p;
    switch (cfg.partition) {
      case PartitionKind::random: p = random_pieces(g, rng); break;
      case PartitionKind::single: p = PiecePartition::single_piece(g); break;
      case PartitionKind::per_factor: p = PiecePartition::per_factor(g); break;
    }
    report.piecewise.add(check_piecewise_bound(g, theta, p, cfg.state_cap));
    PiecePartition uniform = p;
    report.reweighted_uniform.add(check_reweighted_bound(g, theta, uniform.with_uniform_weights(), cfg.state_cap));
    p.weights = random_piece_weights(p.pieces.size(), rng);
    report.reweighted_random.add(check_reweighted_bound(g, theta, p, cfg.state_cap));
  }
  return report;
}

inline int cmd_boundcheck(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto t0 = detail::Clock::now();
  const BoundReport r = run_boundcheck(cfg);
  detail::metric(out, "trials", static_cast<double>(cfg.trials));
  auto emit = [&](const std::string& name, const SlackStats& s) {
    detail::metric(out, name + "_violations", static_cast<double>(s.violations));
    detail::metric(out, name + "_min_slack", s.trials ? s.min_slack : 0.0);
    detail::metric(out, name + "_mean_slack", s.mean_slack);
  };
  emit("piecewise", r.piecewise);
  emit("reweighted_uniform", r.reweighted_uniform);
  emit("reweighted_random", r.reweighted_random);
  detail::metric(out, "violations", static_cast<double>(r.violations()));
  log << "total_seconds\t" << detail::seconds_since(t0) << '\n';
  if (r.violations()) {
    log << "error: bound violated in " << r.violations() << " checks\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

inline int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  data::SyntheticSpec spec;
  std::string source;
  if (!cfg.params_path.empty()) {
    std::ifstream in(cfg.params_path);
    if (!in) throw DataError("cannot open " + cfg.params_path);
    spec = data::read_synthetic_spec(in, cfg.params_path);
    source = "params=" + cfg.params_path;
  } else {
    try {
      spec = data::preset_spec(cfg.preset);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    source = "preset=" + cfg.preset;
  }
  if (!cfg.dump_params_path.empty()) {
    std::ostringstream p;
    data::write_synthetic_spec(p, spec);
    detail::write_file(cfg.dump_params_path, p.str());
  }
  const auto corpus = data::generate_synthetic(spec, cfg.count, cfg.min_length, cfg.max_length, cfg.seed);
  std::ostringstream text;
  data::write_conll(text, corpus,
                    "synthetic " + source + " structure=" + to_string(spec.structure) +
                        " seed=" + std::to_string(cfg.seed) + " count=" + std::to_string(cfg.count));
  detail::write_file(cfg.output_path, text.str());
  std::size_t tokens = 0;
  for (const auto& inst : corpus.instances) tokens += inst.size();
  detail::metric(out, "instances", static_cast<double>(corpus.size()));
  detail::metric(out, "tokens", static_cast<double>(tokens));
  log << "wrote " << cfg.output_path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Validates the config, runs the command and maps failures onto exit codes.
inline int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  try {
    cfg.validate();
    if (cfg.command == "train") return cmd_train(cfg, out, log);
    if (cfg.command == "predict") return cmd_predict(cfg, out, log);
    if (cfg.command == "eval") return cmd_eval(cfg, out, log);
    if (cfg.command == "boundcheck") return cmd_boundcheck(cfg, out, log);
    return cmd_synth(cfg, out, log);
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitDataError;
  }
}

}  // namespace piecewise::cli
