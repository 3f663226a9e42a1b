#include "spiny/simulation.hpp"

#include "spiny/br_model.hpp"
#include "spiny/sds_model.hpp"

#include <cmath>

namespace spiny {

bool measurement_complete(const RunOptions& opts, double v_x2, std::span<const double> fire_times,
                          std::span<const double> spine_x, double x1, double x2) {
    if (!(v_x2 >= opts.stop_theta)) return false;
    for (std::size_t s = 0; s < spine_x.size(); ++s) {
        if (spine_x[s] >= x1 && spine_x[s] <= x2 && std::isnan(fire_times[s])) return false;
    }
    return true;
}

RunResult simulate(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts) {
    return cfg.model == ModelKind::sds ? sds::run(cfg, realization, opts) : br::run(cfg, realization, opts);
}

}  // namespace spiny
