// Generates synthetic heartbeat CSVs in the 188-field interchange format.
// Useful for smoke testing the pipeline without the real segment files.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gafcnn/signal_io.hpp"
#include "gafcnn/synth.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Synthetic heartbeat CSV generator"};

    std::string kind = "arrhythmia";
    std::string out;
    std::size_t rows = 1000;
    std::uint32_t seed = 0;
    app.add_option("--kind", kind, "Corpus kind: arrhythmia (5 classes) or binary (2 classes)")
        ->check(CLI::IsMember({"arrhythmia", "binary"}));
    app.add_option("--rows", rows, "Number of records");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--out", out, "Output CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const gafcnn::Dataset ds = kind == "arrhythmia"
                                       ? gafcnn::synth::make_arrhythmia_like(rows, seed)
                                       : gafcnn::synth::make_binary_like(rows, seed);
        gafcnn::synth::write_csv(ds, out);
        std::cout << "wrote " << ds.size() << " records (" << ds.num_classes << " classes) to "
                  << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
