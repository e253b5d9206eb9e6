// Compares the OpenMP kernels against their serial reference implementations.
#include <omp.h>

#include <cstdio>
#include <thread>

#include "sdeinv/invariance.hpp"
#include "sdeinv/simulate.hpp"

using namespace sdeinv;

namespace {

struct Timing {
    double seconds;
    double checksum;
};

template <typename F>
Timing timed(F&& f) {
    const double t0 = omp_get_wtime();
    const double checksum = f();
    return {omp_get_wtime() - t0, checksum};
}

void row(const char* name, unsigned threads, const Timing& serial, const Timing& par) {
    std::printf("%-22s %2u threads   serial %8.3f s   parallel %8.3f s   speedup %5.2fx   match %s\n",
                name, threads, serial.seconds, par.seconds, serial.seconds / par.seconds,
                serial.checksum == par.checksum ? "yes" : "NO");
}

}  // namespace

int main() {
    const unsigned hw = std::thread::hardware_concurrency();
    std::printf("sdeinv benchmark (%u hardware threads)\n\n", hw);

    {
        const ModelSpec m = ModelSpec::cir(0.3, 0.1, 1.0);
        SimConfig cfg;
        cfg.h = 1e-4;
        cfg.T = 1.0;
        cfg.n_paths = 2000;
        cfg.seed = 42;
        cfg.store_stride = 100;
        const auto serial = timed([&] {
            const PathEnsemble e = simulate_reference(m, {0.2}, cfg);
            double s = 0.0;
            for (double v : e.states) s += v;
            return s;
        });
        const auto par = timed([&] {
            const PathEnsemble e = simulate(m, {0.2}, cfg);
            double s = 0.0;
            for (double v : e.states) s += v;
            return s;
        });
        row("simulate (cir)", hw, serial, par);
    }

    {
        const ModelSpec m = ModelSpec::orthant_diag({0.5, 1.0, 1.5, 0.7}, {0.1, 0.2, 0.3, 0.4});
        const SetOracle d = SetOracle::orthant(4);
        const auto serial = timed([&] {
            const CheckReport r = check_set(m, d, 400, 7, {}, false);
            return static_cast<double>(r.points.size()) + static_cast<double>(r.rank_profile.size());
        });
        const auto par = timed([&] {
            const CheckReport r = check_set(m, d, 400, 7, {}, true);
            return static_cast<double>(r.points.size()) + static_cast<double>(r.rank_profile.size());
        });
        row("check_set (orthant)", hw, serial, par);
    }

    {
        Matrix gamma(2, 2);
        gamma(0, 0) = 1.0;
        gamma(0, 1) = 0.5;
        gamma(1, 0) = 0.5;
        gamma(1, 1) = -0.25;
        const std::vector<double> ts{0.5, 1.0};
        const auto serial = timed([&] {
            const auto est = double_integral_mc(gamma, ts, 20000, 1e-3, 11, false);
            return est[0].mean + est[1].mean;
        });
        const auto par = timed([&] {
            const auto est = double_integral_mc(gamma, ts, 20000, 1e-3, 11, true);
            return est[0].mean + est[1].mean;
        });
        row("double_integral", hw, serial, par);
    }

    return 0;
}
