#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

namespace tkgc {

// Dense row-major matrix. Column vectors are n x 1, scalars 1 x 1.
// T is float (training throughput) or double (tests, gradient checks).
template <typename T>
struct TensorT {
    int rows = 0;
    int cols = 0;
    std::vector<T> v;

    TensorT() = default;
    TensorT(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), T(0)) {}

    static TensorT zeros(int r, int c) { return TensorT(r, c); }

    static TensorT scalar(T x) {
        TensorT t(1, 1);
        t.v[0] = x;
        return t;
    }

    static TensorT column(std::vector<T> xs) {
        TensorT t;
        t.rows = static_cast<int>(xs.size());
        t.cols = 1;
        t.v = std::move(xs);
        return t;
    }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    T* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const T* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    T at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    T item() const { return v[0]; }

    bool same_shape(const TensorT& o) const { return rows == o.rows && cols == o.cols; }

    void fill(T x) { std::fill(v.begin(), v.end(), x); }

    std::string shape_str() const {
        std::ostringstream os;
        os << "(" << rows << "x" << cols << ")";
        return os.str();
    }
};

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (T x : t.v) {
        if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
}

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace tkgc
