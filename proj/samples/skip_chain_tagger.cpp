// Train a skip-chain tagger on a synthetic corpus with piecewise training and with
// node pseudolikelihood, then label a held-out corpus with each.

#include <cstdio>

#include "piecewise/piecewise.hpp"

using namespace piecewise;

namespace {

double label_f1(const crf::CrfModel& model, const data::ColumnCorpus& test) {
  data::LabelSequences gold, pred;
  const auto inputs = test.inputs();
  const auto labels = test.all_labels();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto y = crf::decode(model, inputs[i]);
    std::vector<std::string> names;
    for (int s : y[0]) names.push_back(model.labels().name(s));
    pred.push_back(names);
    gold.push_back(labels[i][0]);
  }
  return data::token_f1(gold, pred, std::vector<std::string>{"SPEAKER", "LOCATION"}).f1;
}

}  // namespace

int main() {
  const auto spec = data::preset_spec("skipchain");
  const auto train = data::generate_synthetic(spec, 200, 10, 10, 11);
  const auto test = data::generate_synthetic(spec, 200, 10, 10, 12);

  for (auto objective : {ObjectiveKind::piecewise, ObjectiveKind::pl_node}) {
    crf::CrfModel model(crf::StructureKind::skip_chain);
    const auto data = model.scan(train.inputs(), train.all_labels());
    crf::TrainingOptions options;
    options.objective = objective;
    const crf::ConditionalObjective f(model, data, options);
    const auto result = maximize(
        [&](const Vector& w, Vector& grad) {
          auto r = f(w);
          grad = std::move(r.gradient);
          return r.value;
        },
        model.weights());
    model.set_weights(result.theta);
    std::printf("%-10s %4d iterations, %zu weights, held-out token F1 %.4f\n", to_string(objective).c_str(),
                result.trace.iterations, model.dimension(), label_f1(model, test));
  }
}
