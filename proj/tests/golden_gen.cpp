// Regenerates tests/data/scaffold_golden.bin, the frozen 3-round scaffold
// trajectory checked by test_fedcore. Run only when the update rules change
// on purpose, then re-review the printed values.

#include <iostream>

#include "feddwa/fedcore.hpp"
#include "feddwa/runio.hpp"
#include "support.hpp"

int main(int argc, char** argv) {
    using namespace feddwa;
    if (argc != 2) {
        std::cerr << "usage: golden_gen <output.bin>\n";
        return 1;
    }
    const ExperimentConfig cfg =
        testsupport::benchmark_config(Algorithm::Scaffold, false, 42);
    ExperimentSetup setup = prepare_experiment(cfg);
    for (int r = 0; r < 3; ++r) {
        run_round(setup.server, setup.clients, cfg.algorithm, setup.options);
    }
    write_checkpoint(argv[1], setup.server.model.params);
    std::cout << "params " << setup.server.model.params.size() << ", norm "
              << setup.server.model.params.norm() << "\nhead:";
    for (Eigen::Index i = 0; i < 6; ++i) {
        std::cout << " " << format_double(setup.server.model.params(i));
    }
    std::cout << "\n";
    return 0;
}
