#pragma once

#include <optional>
#include <string>
#include <vector>

#include "matad/matrix.hpp"

namespace matad {

// Temporal two-way sample: T equally shaped frames plus an optional
// anomaly label (0 normal, 1 anomalous).
struct MatrixSequence {
    std::vector<Matrix> frames;
    std::optional<int> label;
    std::string id;

    int length() const { return static_cast<int>(frames.size()); }
    int n_r() const { return frames.empty() ? 0 : frames.front().rows; }
    int n_c() const { return frames.empty() ? 0 : frames.front().cols; }

    void validate() const {
        if (frames.empty()) throw ContractError("sequence " + id + ": no frames");
        for (const auto& f : frames)
            if (!f.same_shape(frames.front()))
                throw ShapeError("sequence " + id + ": non-uniform frame shapes");
        if (label && *label != 0 && *label != 1)
            throw ContractError("sequence " + id + ": label must be 0 or 1");
    }
};

using Dataset = std::vector<MatrixSequence>;

}  // namespace matad
