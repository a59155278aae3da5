#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "digitrec/common.hpp"

namespace digitrec {

// Dense row-major tensor of doubles. Layout for 4-D data is NHWC.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), data(count(shape), 0.0) {}
    Tensor(std::initializer_list<std::size_t> s) : Tensor(std::vector<std::size_t>(s)) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    double& at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
        return data[((n * shape[1] + h) * shape[2] + w) * shape[3] + c];
    }
    double at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
        return data[((n * shape[1] + h) * shape[2] + w) * shape[3] + c];
    }
    double& at(std::size_t n, std::size_t d) { return data[n * shape[1] + d]; }
    double at(std::size_t n, std::size_t d) const { return data[n * shape[1] + d]; }

    void require_rank(std::size_t r, const char* what) const {
        if (rank() != r) raise(Errc::shape_mismatch, what);
    }

    // Snaps every element to the nearest float32 value; keeps in-memory
    // state identical to what a 32-bit checkpoint blob round-trips.
    void snap_f32() {
        for (double& x : data) x = to_f32(x);
    }
};

}  // namespace digitrec
