#pragma once

// Dense and segmented compute kernels. Every hot kernel comes in a serial
// reference variant and an OpenMP variant; both run the same per-row worker,
// so outputs are bitwise identical and the serial build doubles as the
// correctness reference for the parallel one (see tests/test_kernels.cpp and
// tools/bench_kernels.cpp).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tkgc::kernels {

// Runtime switch, mostly for tests and the benchmark harness.
bool parallel_enabled();
void set_parallel_enabled(bool on);

// Minimum number of scalar ops before a kernel goes parallel.
size_t parallel_threshold();
void set_parallel_threshold(size_t ops);

inline bool go_parallel(size_t ops) {
#ifdef _OPENMP
    return parallel_enabled() && ops >= parallel_threshold();
#else
    (void)ops;
    return false;
#endif
}

// ---------------------------------------------------------------------------
// Matmul: C = A(mxk) * B(kxn), plus the two transposed forms backward needs.
// accumulate=false overwrites C, true adds into it.
// ---------------------------------------------------------------------------

template <typename T>
inline void matmul_nn_rows(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate, int row_begin,
                           int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
        T* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        const T* arow = a + static_cast<size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            T aik = arow[kk];
            if (aik == T(0)) continue;
            const T* brow = b + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <typename T>
void matmul_nn_serial(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    matmul_nn_rows(a, b, c, m, k, n, accumulate, 0, m);
}

template <typename T>
void matmul_nn_omp(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nn_rows(a, b, c, m, k, n, accumulate, i, i + 1);
}

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    if (go_parallel(static_cast<size_t>(m) * k * n))
        matmul_nn_omp(a, b, c, m, k, n, accumulate);
    else
        matmul_nn_serial(a, b, c, m, k, n, accumulate);
}

// C(mxk) = A(mxn) * B(kxn)^T : row dot row, contiguous on both sides.
template <typename T>
inline void matmul_nt_rows(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate, int row_begin,
                           int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
        const T* arow = a + static_cast<size_t>(i) * n;
        T* crow = c + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const T* brow = b + static_cast<size_t>(j) * n;
            T acc = T(0);
            for (int t = 0; t < n; ++t) acc += arow[t] * brow[t];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

template <typename T>
void matmul_nt_serial(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate = false) {
    matmul_nt_rows(a, b, c, m, n, k, accumulate, 0, m);
}

template <typename T>
void matmul_nt_omp(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate = false) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_rows(a, b, c, m, n, k, accumulate, i, i + 1);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate = false) {
    if (go_parallel(static_cast<size_t>(m) * n * k))
        matmul_nt_omp(a, b, c, m, n, k, accumulate);
    else
        matmul_nt_serial(a, b, c, m, n, k, accumulate);
}

// C(kxn) = A(mxk)^T * B(mxn). Parallel over rows of C (columns of A); the
// m-loop stays innermost-serial per output row so results do not depend on
// the thread count.
template <typename T>
inline void matmul_tn_rows(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate, int row_begin,
                           int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
        T* crow = c + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, T(0));
        for (int t = 0; t < m; ++t) {
            T ati = a[static_cast<size_t>(t) * k + i];
            if (ati == T(0)) continue;
            const T* brow = b + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) crow[j] += ati * brow[j];
        }
    }
}

template <typename T>
void matmul_tn_serial(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    matmul_tn_rows(a, b, c, m, k, n, accumulate, 0, k);
}

template <typename T>
void matmul_tn_omp(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < k; ++i) matmul_tn_rows(a, b, c, m, k, n, accumulate, i, i + 1);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n, bool accumulate = false) {
    if (go_parallel(static_cast<size_t>(m) * k * n))
        matmul_tn_omp(a, b, c, m, k, n, accumulate);
    else
        matmul_tn_serial(a, b, c, m, k, n, accumulate);
}

// ---------------------------------------------------------------------------
// Row gather / scatter.
// ---------------------------------------------------------------------------

template <typename T>
inline void gather_rows_range(const T* in, int cols, const int* idx, T* out, int row_begin, int row_end) {
    for (int r = row_begin; r < row_end; ++r) {
        const T* src = in + static_cast<size_t>(idx[r]) * cols;
        T* dst = out + static_cast<size_t>(r) * cols;
        std::copy(src, src + cols, dst);
    }
}

template <typename T>
void gather_rows_serial(const T* in, int cols, const int* idx, int m, T* out) {
    gather_rows_range(in, cols, idx, out, 0, m);
}

template <typename T>
void gather_rows_omp(const T* in, int cols, const int* idx, int m, T* out) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < m; ++r) gather_rows_range(in, cols, idx, out, r, r + 1);
}

template <typename T>
void gather_rows(const T* in, int cols, const int* idx, int m, T* out) {
    if (go_parallel(static_cast<size_t>(m) * cols))
        gather_rows_omp(in, cols, idx, m, out);
    else
        gather_rows_serial(in, cols, idx, m, out);
}

// Scatter-add is kept serial: duplicate target rows would race, and the
// deterministic accumulation order is what makes training runs bit-stable.
template <typename T>
void scatter_add_rows(const T* grad_out, int m, int cols, const int* idx, T* grad_in) {
    for (int r = 0; r < m; ++r) {
        const T* src = grad_out + static_cast<size_t>(r) * cols;
        T* dst = grad_in + static_cast<size_t>(idx[r]) * cols;
        for (int c = 0; c < cols; ++c) dst[c] += src[c];
    }
}

// ---------------------------------------------------------------------------
// Segmented reductions over row groups (CSR-style index).
// ---------------------------------------------------------------------------

// Rows of a matrix grouped into segments; `order` lists row indices segment
// by segment, `offsets` delimits them. Every row belongs to exactly one
// segment.
struct SegmentIndex {
    int num_segments = 0;
    std::vector<int> offsets;  // num_segments + 1
    std::vector<int> order;    // row indices, grouped by segment

    int segment_size(int s) const { return offsets[s + 1] - offsets[s]; }

    // Stable counting sort of row -> segment id assignments.
    static SegmentIndex from_ids(const std::vector<int>& ids, int num_segments) {
        SegmentIndex si;
        si.num_segments = num_segments;
        si.offsets.assign(num_segments + 1, 0);
        for (int id : ids) {
            assert(id >= 0 && id < num_segments);
            si.offsets[id + 1]++;
        }
        for (int s = 0; s < num_segments; ++s) si.offsets[s + 1] += si.offsets[s];
        si.order.resize(ids.size());
        std::vector<int> cursor(si.offsets.begin(), si.offsets.end() - 1);
        for (int r = 0; r < static_cast<int>(ids.size()); ++r) si.order[cursor[ids[r]]++] = r;
        return si;
    }
};

template <typename T>
inline void segment_sum_range(const T* x, int cols, const SegmentIndex& seg, T* out, int seg_begin, int seg_end) {
    for (int s = seg_begin; s < seg_end; ++s) {
        T* dst = out + static_cast<size_t>(s) * cols;
        std::fill(dst, dst + cols, T(0));
        for (int p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p) {
            const T* src = x + static_cast<size_t>(seg.order[p]) * cols;
            for (int c = 0; c < cols; ++c) dst[c] += src[c];
        }
    }
}

template <typename T>
void segment_sum_serial(const T* x, int cols, const SegmentIndex& seg, T* out) {
    segment_sum_range(x, cols, seg, out, 0, seg.num_segments);
}

template <typename T>
void segment_sum_omp(const T* x, int cols, const SegmentIndex& seg, T* out) {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < seg.num_segments; ++s) segment_sum_range(x, cols, seg, out, s, s + 1);
}

template <typename T>
void segment_sum(const T* x, int cols, const SegmentIndex& seg, T* out) {
    if (go_parallel(seg.order.size() * static_cast<size_t>(cols)))
        segment_sum_omp(x, cols, seg, out);
    else
        segment_sum_serial(x, cols, seg, out);
}

// Backward of segment_sum: every member row receives its segment's gradient.
template <typename T>
void segment_sum_backward(const T* grad_out, int cols, const SegmentIndex& seg, T* grad_in) {
    for (int s = 0; s < seg.num_segments; ++s) {
        const T* g = grad_out + static_cast<size_t>(s) * cols;
        for (int p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p) {
            T* dst = grad_in + static_cast<size_t>(seg.order[p]) * cols;
            for (int c = 0; c < cols; ++c) dst[c] += g[c];
        }
    }
}

// Numerically shifted softmax within each segment; x and y are single-column.
template <typename T>
inline void segment_softmax_range(const T* x, const SegmentIndex& seg, T* y, int seg_begin, int seg_end) {
    for (int s = seg_begin; s < seg_end; ++s) {
        int lo = seg.offsets[s], hi = seg.offsets[s + 1];
        if (lo == hi) continue;
        T mx = x[seg.order[lo]];
        for (int p = lo + 1; p < hi; ++p) mx = std::max(mx, x[seg.order[p]]);
        T total = T(0);
        for (int p = lo; p < hi; ++p) {
            T e = std::exp(x[seg.order[p]] - mx);
            y[seg.order[p]] = e;
            total += e;
        }
        for (int p = lo; p < hi; ++p) y[seg.order[p]] /= total;
    }
}

template <typename T>
void segment_softmax_serial(const T* x, const SegmentIndex& seg, T* y) {
    segment_softmax_range(x, seg, y, 0, seg.num_segments);
}

template <typename T>
void segment_softmax_omp(const T* x, const SegmentIndex& seg, T* y) {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < seg.num_segments; ++s) segment_softmax_range(x, seg, y, s, s + 1);
}

template <typename T>
void segment_softmax(const T* x, const SegmentIndex& seg, T* y) {
    if (go_parallel(seg.order.size() * 4))
        segment_softmax_omp(x, seg, y);
    else
        segment_softmax_serial(x, seg, y);
}

// dX = Y .* (dY - sum(dY .* Y)) per segment.
template <typename T>
void segment_softmax_backward(const T* y, const T* grad_y, const SegmentIndex& seg, T* grad_x) {
    for (int s = 0; s < seg.num_segments; ++s) {
        int lo = seg.offsets[s], hi = seg.offsets[s + 1];
        T dot = T(0);
        for (int p = lo; p < hi; ++p) {
            int r = seg.order[p];
            dot += grad_y[r] * y[r];
        }
        for (int p = lo; p < hi; ++p) {
            int r = seg.order[p];
            grad_x[r] += y[r] * (grad_y[r] - dot);
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise helpers (memory bound; parallel only when large).
// ---------------------------------------------------------------------------

template <typename T, typename F>
void elementwise(const T* x, T* y, size_t n, F f) {
    if (go_parallel(n)) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(x[i]);
    } else {
        for (size_t i = 0; i < n; ++i) y[i] = f(x[i]);
    }
}

template <typename T, typename F>
void elementwise2(const T* a, const T* b, T* y, size_t n, F f) {
    if (go_parallel(n)) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) y[i] = f(a[i], b[i]);
    } else {
        for (size_t i = 0; i < n; ++i) y[i] = f(a[i], b[i]);
    }
}

}  // namespace tkgc::kernels
