#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace tkgc::rng {

// splitmix64 step; used both as a generator and as a seed-derivation hash.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic seed derivation: one master seed fans out into independent
// streams keyed by a path of integers (purpose tag, epoch, query index, ...).
inline uint64_t derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t s = seed ^ 0x6a09e667f3bcc908ULL;
    for (uint64_t p : path) {
        s ^= splitmix64(s) + p;
        splitmix64(s);
    }
    return splitmix64(s);
}

// Stream tags so call sites don't collide by accident.
enum StreamTag : uint64_t {
    kParamInit = 1,
    kShuffle = 2,
    kEdgeSample = 3,
    kSplit = 4,
    kEval = 5,
    kSynthetic = 6,
};

// Self-contained xoshiro256** stream. We avoid <random> distributions so the
// bit stream is identical across standard library implementations.
class Stream {
public:
    explicit Stream(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : s_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    // k distinct values from [0, n), order of discovery (partial Fisher-Yates).
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k >= n) {
            std::vector<int> all(n);
            for (int i = 0; i < n; ++i) all[i] = i;
            shuffle(all);
            return all;
        }
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out;
        out.reserve(k);
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(below(static_cast<uint64_t>(n - i)));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    uint64_t s_[4];
};

}  // namespace tkgc::rng
