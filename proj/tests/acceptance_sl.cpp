// Desk-scale supervised gate: train the distance regression on 10000 graphs
// for 5000 iterations and require the unrolled readout to refine, with the
// step-8 test error at most a third of the step-1 error and the mean error
// strictly decreasing across steps 1 through 8. Test MSE is measured on an
// independent 1000-graph suite, mirroring the full-scale protocol.

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "routelab/sp_regression.hpp"

int main() {
    using namespace routelab;
    using namespace routelab::spreg;
    try {
        DatasetConfig dc;
        dc.count = 10500;
        dc.validation = 500;  // 10000 training graphs plus a held-out slice
        const Dataset data = build_dataset(dc, 42);

        SlConfig sc;  // one aggregation per step, unroll 8, 5000 iterations, batch 32
        sc.log_every = 1000;  // loss-curve measurements do not affect training
        const RegressionSample& first = data.samples.front();
        SlModel model(sc, static_cast<int>(first.node_obs.cols()), first.graph.degree,
                      first.graph.node_count, 7);
        train_regression(model, data, sc, 12345);

        DatasetConfig test_cfg;
        test_cfg.count = 1000;
        test_cfg.validation = 0;
        const Dataset test = build_dataset(test_cfg, 4242);
        const auto mse = evaluate_at_steps(model, test.samples, {1, 2, 3, 4, 5, 6, 7, 8});
        bool decreasing = true;
        for (int t = 1; t < 8; ++t)
            if (!(mse.at(t + 1) < mse.at(t))) decreasing = false;
        const bool ratio_ok = mse.at(8) <= mse.at(1) / 3.0;
        const bool pass = decreasing && ratio_ok;

        std::ostringstream d;
        d << "test mse by step";
        for (int t = 1; t <= 8; ++t) {
            char buf[32];
            std::snprintf(buf, sizeof buf, " %.4g", mse.at(t));
            d << buf;
        }
        d << "; step8/step1 " << mse.at(8) / mse.at(1) << " (want <= 1/3), strictly decreasing: "
          << (decreasing ? "yes" : "NO");
        std::printf("[%s] criterion 6 (unrolled distance regression): %s\n",
                    pass ? "PASS" : "FAIL", d.str().c_str());
        return pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::printf("[FAIL] criterion 6 (unrolled distance regression): exception: %s\n",
                    e.what());
        return 1;
    }
}
