#pragma once

#include <stdexcept>
#include <vector>

#include "skt/common.hpp"

namespace skt {

/// Trajectory data for one species: column n is the state at times[n].
struct SnapshotMatrix {
    Mat data;
    std::vector<double> times;
    int component = 1;   // species tag, 1 or 2

    void validate() const {
        if (static_cast<std::size_t>(data.cols()) != times.size()) {
            throw std::invalid_argument("SnapshotMatrix: column count does not match times");
        }
        if (!data.allFinite()) {
            throw std::invalid_argument("SnapshotMatrix: non-finite entries");
        }
    }
};

} // namespace skt
