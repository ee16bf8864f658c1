#include "dynloss/schedule.hpp"

#include <stdexcept>

namespace dynloss {

void OscillationSchedule::validate() const {
    if (!(amplitude >= 1.0)) {
        throw std::invalid_argument("schedule: amplitude A must be >= 1");
    }
    if (period < 2) {
        throw std::invalid_argument("schedule: period T must be >= 2");
    }
    if (num_classes < 2) {
        throw std::invalid_argument("schedule: num_classes C must be >= 2");
    }
    if (stop_step && *stop_step < 0) {
        throw std::invalid_argument("schedule: stop_step must be >= 0");
    }
}

double OscillationSchedule::tent(long t_in_period) const {
    if (t_in_period == 0) {
        return 1.0;
    }
    const double slope = 2.0 * (amplitude - 1.0) / static_cast<double>(period);
    if (2 * t_in_period <= period) {
        return 1.0 + slope * static_cast<double>(t_in_period);
    }
    return 2.0 * amplitude - slope * static_cast<double>(t_in_period) - 1.0;
}

ClassWeights OscillationSchedule::weights(long t) const {
    ClassWeights gamma = ClassWeights::Ones(num_classes);
    if (stop_step && t >= *stop_step) {
        return gamma;
    }
    gamma[emphasized_class(t)] = tent(t % period);
    const double sum = gamma.sum();
    return gamma * (static_cast<double>(num_classes) / sum);
}

}  // namespace dynloss
