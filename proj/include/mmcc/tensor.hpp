#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace mmcc {

// Dense row-major array of doubles. Rank is the length of `shape`;
// vectors are rank-1, weight matrices rank-2 (rows x cols).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (count(shape) != values.size())
            throw std::invalid_argument("Tensor: shape/value count mismatch");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }

    static Tensor vec(std::vector<double> v) {
        std::vector<std::size_t> s{v.size()};
        return Tensor(std::move(s), std::move(v));
    }

    std::size_t size() const { return values.size(); }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    bool finite() const {
        for (double x : values)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

} // namespace mmcc
