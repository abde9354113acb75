#pragma once

#include <cstdint>
#include <vector>

namespace divlex {

/// Sparse vector in coordinate form; indices strictly increasing.
struct SparseVector {
    std::size_t dim = 0;
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const noexcept { return index.size(); }

    void push(std::uint32_t i, double v) {
        index.push_back(i);
        value.push_back(v);
    }

    std::vector<double> dense() const {
        std::vector<double> out(dim, 0.0);
        for (std::size_t k = 0; k < index.size(); ++k) out[index[k]] = value[k];
        return out;
    }

    double sum() const noexcept {
        double s = 0.0;
        for (double v : value) s += v;
        return s;
    }

    bool operator==(const SparseVector&) const = default;
};

}  // namespace divlex
