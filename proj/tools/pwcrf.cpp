// pwcrf: train, apply and evaluate chain, factorial and skip-chain CRFs, check the
// piece bounds on random graphs, and generate synthetic corpora.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "piecewise/commands.hpp"

using namespace piecewise;

int main(int argc, char** argv) {
  cli::RunConfig cfg;
  CLI::App app{"Piecewise and exact training for conditional random fields"};
  app.set_config("--config", "", "Read `key = value` lines (long option names); flags override the file");
  app.require_subcommand(1);

  std::string objective = "piecewise", structure = "chain", inference = "tree", schedule = "sequential",
              partition = "random";
  bool no_prior = false;

  app.add_option("--objective", objective, "exact, piecewise, pw-reweighted, pl-node or pl-edge")
      ->check(CLI::IsMember({"exact", "piecewise", "pw-reweighted", "pl-node", "pl-edge"}))
      ->capture_default_str();
  app.add_option("--structure", structure, "chain, factorial or skipchain")
      ->check(CLI::IsMember({"chain", "factorial", "skipchain"}))
      ->capture_default_str();
  app.add_option("--inference", inference, "Inference for exact training: brute, tree or loopy")
      ->check(CLI::IsMember({"brute", "tree", "loopy"}))
      ->capture_default_str();
  app.add_option("--sigma2", cfg.sigma2, "Gaussian prior variance")->capture_default_str();
  app.add_flag("--no-prior", no_prior, "Train without the Gaussian prior");
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads for objective evaluation")->capture_default_str();
  app.add_option("--state-cap", cfg.state_cap, "Largest joint state space enumerated exactly")->capture_default_str();

  app.add_option("--memory", cfg.optimizer.memory, "L-BFGS history pairs")->capture_default_str();
  app.add_option("--max-iterations", cfg.optimizer.max_iterations, "Optimizer iteration limit")->capture_default_str();
  app.add_option("--tolerance", cfg.optimizer.gradient_tolerance, "Stop when the gradient max-norm is below this")
      ->capture_default_str();
  app.add_option("--bp-iterations", cfg.bp.max_iterations, "Loopy BP sweep limit")->capture_default_str();
  app.add_option("--bp-tolerance", cfg.bp.convergence_tolerance, "Loopy BP convergence threshold")
      ->capture_default_str();
  app.add_option("--bp-damping", cfg.bp.damping, "Loopy BP message damping in [0,1)")->capture_default_str();
  app.add_option("--bp-schedule", schedule, "sequential or synchronous")
      ->check(CLI::IsMember({"sequential", "synchronous"}))
      ->capture_default_str();

  app.add_option("--train", cfg.train_path, "Training corpus (columns: word, attributes..., labels)");
  app.add_option("--test", cfg.test_path, "Corpus to label");
  app.add_option("--model", cfg.model_path, "Model file");
  app.add_option("--output", cfg.output_path, "Output file");
  app.add_option("--init-model", cfg.init_model_path, "Warm-start weights from this model");
  app.add_option("--templates", cfg.templates, "Observation feature templates")->delimiter(',')->capture_default_str();
  app.add_option("--lexicon", cfg.lexicons, "Lexicon NAME=path (one entry per line); repeatable");
  app.add_flag("--unlabeled", cfg.unlabeled, "Test corpus has no gold label columns");
  app.add_option("--predictions", cfg.predictions_path, "Predictions file written by predict");
  app.add_option("--gold", cfg.gold_path, "Separate gold corpus for eval");
  app.add_option("--target-labels", cfg.target_labels, "Labels scored with per-token F1")->delimiter(',');

  app.add_option("--preset", cfg.preset, "Synthetic generator: chain, skipchain or factorial")->capture_default_str();
  app.add_option("--params", cfg.params_path, "Synthetic generator parameter file (overrides --preset)");
  app.add_option("--dump-params", cfg.dump_params_path, "Also write the generator parameters here");
  app.add_option("--count", cfg.count, "Number of synthetic instances")->capture_default_str();
  app.add_option("--min-length", cfg.min_length, "Shortest synthetic instance")->capture_default_str();
  app.add_option("--max-length", cfg.max_length, "Longest synthetic instance")->capture_default_str();

  app.add_option("--trials", cfg.trials, "Random bound-check instances")->capture_default_str();
  app.add_option("--max-vars", cfg.max_vars, "Largest bound-check graph")->capture_default_str();
  app.add_option("--max-card", cfg.max_card, "Largest bound-check cardinality")->capture_default_str();
  app.add_option("--theta-range", cfg.theta_range, "Bound-check parameters are uniform in [-r, r]")
      ->capture_default_str();
  app.add_option("--partition", partition, "Bound-check pieces: random, single or per-factor")
      ->check(CLI::IsMember({"random", "single", "per-factor"}))
      ->capture_default_str();
  app.add_flag("--zero-theta", cfg.zero_theta, "Bound-check at zero parameters");

  for (const auto& [name, help] : std::map<std::string, std::string>{
           {"train", "Fit a model and write it to --model"},
           {"predict", "Label --test with --model by max-product decoding, writing --output"},
           {"eval", "Score --predictions (chunk F1 for BIO labels, per-token F1 otherwise)"},
           {"boundcheck", "Verify the piecewise and reweighted bounds on random graphs"},
           {"synth", "Generate a synthetic labeled corpus"}})
    app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitDataError;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  try {
    cfg.objective = parse_objective(objective);
    cfg.structure = crf::parse_structure(structure);
    cfg.inference = cli::parse_inference(inference);
    cfg.partition = cli::parse_partition(partition);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitDataError;
  }
  cfg.bp.schedule = schedule == "synchronous" ? BpSchedule::synchronous : BpSchedule::sequential;
  cfg.prior = !no_prior;
  return cli::run_command(cfg, std::cout, std::cerr);
}
