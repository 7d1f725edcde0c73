#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "fsner/error.hpp"

namespace fsner {

// Dense row-major tensor. Training instantiates T = float, gradient checks
// and optimizer oracles T = double.
template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(size_t(count(shape)), T(0)) {}
    Tensor(std::vector<int> s, std::vector<T> values) : shape(std::move(s)), v(std::move(values)) {
        require(int64_t(v.size()) == count(shape), "tensor value count does not match shape");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static int64_t count(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    int64_t numel() const { return int64_t(v.size()); }
    int ndim() const { return int(shape.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    bool empty() const { return v.empty(); }

    T& at(int i) {
        assert(ndim() == 1);
        return v[size_t(i)];
    }
    T at(int i) const {
        assert(ndim() == 1);
        return v[size_t(i)];
    }
    T& at(int i, int j) {
        assert(ndim() == 2);
        return v[size_t(i) * size_t(shape[1]) + size_t(j)];
    }
    T at(int i, int j) const {
        assert(ndim() == 2);
        return v[size_t(i) * size_t(shape[1]) + size_t(j)];
    }
    T& at(int i, int j, int k) {
        assert(ndim() == 3);
        return v[(size_t(i) * size_t(shape[1]) + size_t(j)) * size_t(shape[2]) + size_t(k)];
    }
    T at(int i, int j, int k) const {
        assert(ndim() == 3);
        return v[(size_t(i) * size_t(shape[1]) + size_t(j)) * size_t(shape[2]) + size_t(k)];
    }

    // Pointer to row i of a 2-d tensor (or the flat slice of higher ranks).
    T* row(int i) {
        assert(ndim() >= 2);
        return v.data() + size_t(i) * size_t(numel() / shape[0]);
    }
    const T* row(int i) const {
        assert(ndim() >= 2);
        return v.data() + size_t(i) * size_t(numel() / shape[0]);
    }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (T x : v) {
            if (!std::isfinite(double(x))) return false;
        }
        return true;
    }
};

template <class T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) return false;
    if (a.v.empty()) return b.v.empty();
    return std::memcmp(a.v.data(), b.v.data(), a.v.size() * sizeof(T)) == 0;
}

template <class T>
std::string shape_string(const Tensor<T>& t) {
    std::string s = "(";
    for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

template <class T>
void require_shape(const Tensor<T>& t, const std::vector<int>& shape, const std::string& name) {
    if (t.shape != shape) {
        Tensor<T> want;
        want.shape = shape;
        fail("tensor '" + name + "' has shape " + shape_string(t) + ", expected " +
             shape_string(want));
    }
}

// Debug-build finiteness checks at kernel boundaries.
#ifndef NDEBUG
template <class T>
inline void debug_check_finite(const Tensor<T>& t, const char* where) {
    if (!t.all_finite()) fail(std::string("non-finite value produced by ") + where);
}
#else
template <class T>
inline void debug_check_finite(const Tensor<T>&, const char*) {}
#endif

template <class T>
Tensor<float> to_float(const Tensor<T>& t) {
    Tensor<float> out;
    out.shape = t.shape;
    out.v.resize(t.v.size());
    for (size_t i = 0; i < t.v.size(); ++i) out.v[i] = float(t.v[i]);
    return out;
}

template <class T>
Tensor<double> to_double(const Tensor<T>& t) {
    Tensor<double> out;
    out.shape = t.shape;
    out.v.resize(t.v.size());
    for (size_t i = 0; i < t.v.size(); ++i) out.v[i] = double(t.v[i]);
    return out;
}

}  // namespace fsner
