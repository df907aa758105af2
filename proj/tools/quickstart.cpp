// Trains a static-filter model on a small in-memory benchmark and prints
// where its filters ended up.

#include "tafilter/inspect.hpp"
#include "tafilter/train.hpp"

#include <iostream>

int main() {
    taf::SynthSpec spec;
    spec.train_count = 100;
    spec.test_count = 50;
    const taf::SynthData data = taf::synth_sample(spec);

    taf::ModelConfig model;
    model.kind = taf::ModelKind::Static;
    model.filters = 5;
    model.taps = 3;
    model.hidden = 32;

    taf::TrainConfig train;
    train.iterations = 500;
    train.learning_rate = 0.03;
    train.eval_every = 0;

    const auto result = taf::fit(model, data.dataset, train);
    std::cout << "test accuracy " << taf::accuracy(result.model, data.dataset.test) << "\n\n";
    std::cout << taf::placements_tsv(taf::inspect_placements(result.model, 100));
    std::cout << "\nplanted centers:";
    for (int c = 0; c < spec.classes; ++c) std::cout << ' ' << spec.position(c);
    std::cout << '\n';
}
