#include "mssnn/trainer.hpp"

#include <cstdio>

namespace mssnn {

std::string format_log_line(std::size_t epoch, const LossBreakdown& lb) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu\t%.9f\t%.9f\t%.9f\t%.9f", epoch, lb.nll, lb.kl,
                  lb.rank, lb.total);
    return buf;
}

}  // namespace mssnn
