#pragma once

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tkgc/rng.hpp"
#include "tkgc/tensor.hpp"

namespace tkgc {

// Gradients for a parameter set, indexed like the store. Empty tensors mean
// "no gradient reached this parameter" and read as zero.
template <typename T>
struct ParamGrads {
    std::vector<TensorT<T>> g;

    explicit ParamGrads(int n = 0) : g(n) {}
    bool has(int i) const { return !g[i].empty(); }
};

// Named parameter tensors with accumulated gradients. Values are read
// concurrently during forward passes; gradient accumulation from many tapes
// is serialized behind a mutex while callers control the accumulation order.
template <typename T>
class ParamStore {
public:
    int add(const std::string& name, int rows, int cols) {
        if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        int id = static_cast<int>(entries_.size());
        entries_.push_back(Entry{name, TensorT<T>(rows, cols), TensorT<T>(rows, cols)});
        by_name_[name] = id;
        return id;
    }

    int lookup(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? -1 : it->second;
    }

    int size() const { return static_cast<int>(entries_.size()); }
    const std::string& name(int id) const { return entries_[id].name; }

    TensorT<T>& value(int id) { return entries_[id].value; }
    const TensorT<T>& value(int id) const { return entries_[id].value; }

    TensorT<T>& grad(int id) { return entries_[id].grad; }
    const TensorT<T>& grad(int id) const { return entries_[id].grad; }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(T(0));
    }

    void accumulate(const ParamGrads<T>& local) {
        std::lock_guard<std::mutex> lock(acc_mutex_);
        for (int i = 0; i < size() && i < static_cast<int>(local.g.size()); ++i) {
            if (!local.has(i)) continue;
            auto& dst = entries_[i].grad;
            const auto& src = local.g[i];
            for (size_t k = 0; k < dst.size(); ++k) dst.v[k] += src.v[k];
        }
    }

    double grad_sq_norm() const {
        double acc = 0;
        for (const auto& e : entries_)
            for (T x : e.grad.v) acc += static_cast<double>(x) * static_cast<double>(x);
        return acc;
    }

    void scale_grads(double s) {
        for (auto& e : entries_)
            for (T& x : e.grad.v) x = static_cast<T>(x * s);
    }

    // Uniform init in +-sqrt(6 / (rows + cols)), one sequential stream.
    void init_uniform(uint64_t seed) {
        rng::Stream stream(rng::derive(seed, {rng::kParamInit}));
        for (auto& e : entries_) {
            double limit = std::sqrt(6.0 / (e.value.rows + e.value.cols));
            for (T& x : e.value.v) x = static_cast<T>(stream.uniform(-limit, limit));
        }
    }

private:
    struct Entry {
        std::string name;
        TensorT<T> value;
        TensorT<T> grad;
    };

    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> by_name_;
    mutable std::mutex acc_mutex_;
};

}  // namespace tkgc
