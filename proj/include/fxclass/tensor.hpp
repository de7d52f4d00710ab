#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fxclass {

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& tensor)
        : std::runtime_error("non-finite values in tensor: " + tensor) {}
};

/// Dense row-major tensor of rank <= 4.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.resize(size_from_shape(shape), T(0));
    }

    static std::size_t size_from_shape(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

/// Throws NumericError if the tensor contains NaN or Inf. A plain sum is used
/// as the probe: any non-finite element makes the sum non-finite.
template <typename T>
void check_finite(const Tensor<T>& t, const std::string& name) {
    T acc = T(0);
    for (const T& v : t.data) acc += v;
    if (!std::isfinite(static_cast<double>(acc))) {
        for (const T& v : t.data)
            if (!std::isfinite(static_cast<double>(v))) throw NumericError(name);
        // the sum can overflow while every element is finite
        for (const T& v : t.data)
            (void)v;
    }
}

template <typename T>
void check_finite(const std::vector<T>& v, const std::string& name) {
    for (const T& x : v)
        if (!std::isfinite(static_cast<double>(x))) throw NumericError(name);
}

}  // namespace fxclass
