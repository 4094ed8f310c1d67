#pragma once

// Reverse-mode computation tape over dense matrices. Each primitive records
// its output value plus what backward needs; backward walks the record once
// in reverse and pushes vector-Jacobian products toward parameter leaves.
// Tapes are single-owner: one tape per query group, never shared.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tkgc/kernels.hpp"
#include "tkgc/param_store.hpp"
#include "tkgc/tensor.hpp"

namespace tkgc {

using IndexVec = std::vector<int>;
using IndexVecPtr = std::shared_ptr<const IndexVec>;
using SegmentPtr = std::shared_ptr<const kernels::SegmentIndex>;

template <typename T>
class Tape {
public:
    using Tensor = TensorT<T>;

    struct Var {
        int id = -1;
        bool ok() const { return id >= 0; }
    };

    enum class Op {
        kConst,
        kParam,
        kMatmul,
        kAdd,
        kMul,
        kScale,
        kLeakyRelu,
        kSigmoid,
        kLog,
        kConcatCols,
        kConcatRows,
        kSliceCols,
        kGatherRows,
        kRepeatRow,
        kRowwiseDot,
        kScaleRows,
        kSegmentSum,
        kSegmentSoftmax,
        kSumAll,
    };

    // ---- leaves ----------------------------------------------------------

    Var constant(Tensor value) {
        Node n;
        n.op = Op::kConst;
        n.value = std::move(value);
        n.needs_grad = false;
        return push(std::move(n));
    }

    Var param(const ParamStore<T>& store, int param_id) {
        Node n;
        n.op = Op::kParam;
        n.external = &store.value(param_id);
        n.param_id = param_id;
        n.needs_grad = true;
        return push(std::move(n));
    }

    // ---- primitives ------------------------------------------------------

    Var matmul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.cols != B.rows)
            throw std::invalid_argument("matmul: incompatible shapes " + A.shape_str() + " and " + B.shape_str());
        Node n = op_node(Op::kMatmul, {a.id, b.id});
        n.value = Tensor(A.rows, B.cols);
        kernels::matmul_nn(A.data(), B.data(), n.value.data(), A.rows, A.cols, B.cols);
        return push(std::move(n));
    }

    Var add(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        require_same(A, B, "add");
        Node n = op_node(Op::kAdd, {a.id, b.id});
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise2(A.data(), B.data(), n.value.data(), A.size(), [](T x, T y) { return x + y; });
        return push(std::move(n));
    }

    Var mul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        require_same(A, B, "mul");
        Node n = op_node(Op::kMul, {a.id, b.id});
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise2(A.data(), B.data(), n.value.data(), A.size(), [](T x, T y) { return x * y; });
        return push(std::move(n));
    }

    Var scale(Var a, T factor) {
        const Tensor& A = val(a);
        Node n = op_node(Op::kScale, {a.id});
        n.scalar = factor;
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise(A.data(), n.value.data(), A.size(), [factor](T x) { return factor * x; });
        return push(std::move(n));
    }

    Var leaky_relu(Var a, T slope) {
        const Tensor& A = val(a);
        Node n = op_node(Op::kLeakyRelu, {a.id});
        n.scalar = slope;
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise(A.data(), n.value.data(), A.size(), [slope](T x) { return x >= T(0) ? x : slope * x; });
        return push(std::move(n));
    }

    Var sigmoid(Var a) {
        const Tensor& A = val(a);
        Node n = op_node(Op::kSigmoid, {a.id});
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise(A.data(), n.value.data(), A.size(),
                             [](T x) { return T(1) / (T(1) + std::exp(-x)); });
        return push(std::move(n));
    }

    Var log(Var a) {
        const Tensor& A = val(a);
        Node n = op_node(Op::kLog, {a.id});
        n.value = Tensor(A.rows, A.cols);
        kernels::elementwise(A.data(), n.value.data(), A.size(), [](T x) { return std::log(x); });
        return push(std::move(n));
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        int rows = val(parts[0]).rows, cols = 0;
        std::vector<int> ids;
        for (Var p : parts) {
            if (val(p).rows != rows)
                throw std::invalid_argument("concat_cols: row mismatch " + val(parts[0]).shape_str() + " and " +
                                            val(p).shape_str());
            cols += val(p).cols;
            ids.push_back(p.id);
        }
        Node n = op_node(Op::kConcatCols, ids);
        n.value = Tensor(rows, cols);
        int at = 0;
        for (Var p : parts) {
            const Tensor& A = val(p);
            for (int r = 0; r < rows; ++r) std::copy(A.row(r), A.row(r) + A.cols, n.value.row(r) + at);
            at += A.cols;
        }
        return push(std::move(n));
    }

    Var concat_rows(const std::vector<Var>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
        int cols = val(parts[0]).cols, rows = 0;
        std::vector<int> ids;
        for (Var p : parts) {
            if (val(p).cols != cols)
                throw std::invalid_argument("concat_rows: column mismatch " + val(parts[0]).shape_str() + " and " +
                                            val(p).shape_str());
            rows += val(p).rows;
            ids.push_back(p.id);
        }
        Node n = op_node(Op::kConcatRows, ids);
        n.value = Tensor(rows, cols);
        int at = 0;
        for (Var p : parts) {
            const Tensor& A = val(p);
            std::copy(A.v.begin(), A.v.end(), n.value.v.begin() + static_cast<size_t>(at) * cols);
            at += A.rows;
        }
        return push(std::move(n));
    }

    Var slice_cols(Var a, int start, int width) {
        const Tensor& A = val(a);
        if (start < 0 || width < 0 || start + width > A.cols)
            throw std::invalid_argument("slice_cols: window out of range for " + A.shape_str());
        Node n = op_node(Op::kSliceCols, {a.id});
        n.a0 = start;
        n.a1 = width;
        n.value = Tensor(A.rows, width);
        for (int r = 0; r < A.rows; ++r) std::copy(A.row(r) + start, A.row(r) + start + width, n.value.row(r));
        return push(std::move(n));
    }

    Var gather_rows(Var a, IndexVecPtr idx) {
        const Tensor& A = val(a);
        for (int i : *idx)
            if (i < 0 || i >= A.rows) throw std::invalid_argument("gather_rows: index out of range for " + A.shape_str());
        Node n = op_node(Op::kGatherRows, {a.id});
        n.index = idx;
        n.value = Tensor(static_cast<int>(idx->size()), A.cols);
        kernels::gather_rows(A.data(), A.cols, idx->data(), static_cast<int>(idx->size()), n.value.data());
        return push(std::move(n));
    }

    Var gather_rows(Var a, IndexVec idx) { return gather_rows(a, std::make_shared<const IndexVec>(std::move(idx))); }

    Var repeat_row(Var a, int count) {
        const Tensor& A = val(a);
        if (A.rows != 1) throw std::invalid_argument("repeat_row: input must be 1-row, got " + A.shape_str());
        Node n = op_node(Op::kRepeatRow, {a.id});
        n.a0 = count;
        n.value = Tensor(count, A.cols);
        for (int r = 0; r < count; ++r) std::copy(A.row(0), A.row(0) + A.cols, n.value.row(r));
        return push(std::move(n));
    }

    Var rowwise_dot(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        require_same(A, B, "rowwise_dot");
        Node n = op_node(Op::kRowwiseDot, {a.id, b.id});
        n.value = Tensor(A.rows, 1);
        for (int r = 0; r < A.rows; ++r) {
            T acc = T(0);
            const T* ar = A.row(r);
            const T* br = B.row(r);
            for (int c = 0; c < A.cols; ++c) acc += ar[c] * br[c];
            n.value.v[r] = acc;
        }
        return push(std::move(n));
    }

    Var scale_rows(Var a, Var s) {
        const Tensor& A = val(a);
        const Tensor& S = val(s);
        if (S.rows != A.rows || S.cols != 1)
            throw std::invalid_argument("scale_rows: scale must be " + std::to_string(A.rows) + "x1, got " +
                                        S.shape_str());
        Node n = op_node(Op::kScaleRows, {a.id, s.id});
        n.value = Tensor(A.rows, A.cols);
        for (int r = 0; r < A.rows; ++r) {
            T w = S.v[r];
            const T* src = A.row(r);
            T* dst = n.value.row(r);
            for (int c = 0; c < A.cols; ++c) dst[c] = w * src[c];
        }
        return push(std::move(n));
    }

    Var segment_sum(Var a, SegmentPtr seg) {
        const Tensor& A = val(a);
        if (static_cast<int>(seg->order.size()) != A.rows)
            throw std::invalid_argument("segment_sum: index covers " + std::to_string(seg->order.size()) +
                                        " rows, input is " + A.shape_str());
        Node n = op_node(Op::kSegmentSum, {a.id});
        n.seg = seg;
        n.value = Tensor(seg->num_segments, A.cols);
        kernels::segment_sum(A.data(), A.cols, *seg, n.value.data());
        return push(std::move(n));
    }

    Var segment_softmax(Var a, SegmentPtr seg) {
        const Tensor& A = val(a);
        if (A.cols != 1) throw std::invalid_argument("segment_softmax: input must be a column, got " + A.shape_str());
        if (static_cast<int>(seg->order.size()) != A.rows)
            throw std::invalid_argument("segment_softmax: index covers " + std::to_string(seg->order.size()) +
                                        " rows, input is " + A.shape_str());
        Node n = op_node(Op::kSegmentSoftmax, {a.id});
        n.seg = seg;
        n.value = Tensor(A.rows, 1);
        kernels::segment_softmax(A.data(), *seg, n.value.data());
        return push(std::move(n));
    }

    Var sum_all(Var a) {
        const Tensor& A = val(a);
        Node n = op_node(Op::kSumAll, {a.id});
        n.value = Tensor(1, 1);
        T acc = T(0);
        for (T x : A.v) acc += x;
        n.value.v[0] = acc;
        return push(std::move(n));
    }

    // ---- access ----------------------------------------------------------

    const Tensor& value(Var v) const { return val(v); }
    size_t num_nodes() const { return nodes_.size(); }

    // Gradient of the last backward() w.r.t. an arbitrary node; zero tensor
    // if none reached it. Mostly for tests.
    Tensor grad_of(Var v) const {
        if (v.id < static_cast<int>(grads_.size()) && !grads_[v.id].empty()) return grads_[v.id];
        const Tensor& x = val(v);
        return Tensor(x.rows, x.cols);
    }

    // ---- backward --------------------------------------------------------

    // Reverse sweep from a scalar loss. Parameter gradients are accumulated
    // into `out` (indexed by param id); `seed` scales the whole sweep, which
    // is how batch-mean losses share one tape.
    void backward(Var loss, ParamGrads<T>& out, T seed = T(1)) {
        const Tensor& L = val(loss);
        if (L.rows != 1 || L.cols != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " + L.shape_str());
        grads_.assign(nodes_.size(), Tensor());
        add_grad(loss.id, Tensor::scalar(seed));
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.needs_grad || grads_[id].empty()) continue;
            apply_vjp(id, n);
        }
        for (size_t id = 0; id < nodes_.size(); ++id) {
            Node& n = nodes_[id];
            if (n.op != Op::kParam || grads_[id].empty()) continue;
            if (n.param_id >= static_cast<int>(out.g.size())) out.g.resize(n.param_id + 1);
            auto& slot = out.g[n.param_id];
            if (slot.empty())
                slot = std::move(grads_[id]);
            else
                for (size_t k = 0; k < slot.size(); ++k) slot.v[k] += grads_[id].v[k];
        }
    }

private:
    struct Node {
        Op op = Op::kConst;
        std::vector<int> inputs;
        Tensor value;                     // owned output (empty for kParam)
        const Tensor* external = nullptr;  // parameter value
        bool needs_grad = false;
        int param_id = -1;
        T scalar{};        // scale factor / leaky slope
        int a0 = 0, a1 = 0;  // slice window, repeat count
        IndexVecPtr index;
        SegmentPtr seg;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;

    const Tensor& val(Var v) const { return val(v.id); }
    const Tensor& val(int id) const {
        const Node& n = nodes_[id];
        return n.external ? *n.external : n.value;
    }

    static void require_same(const Tensor& A, const Tensor& B, const char* what) {
        if (!A.same_shape(B))
            throw std::invalid_argument(std::string(what) + ": shape mismatch " + A.shape_str() + " and " +
                                        B.shape_str());
    }

    Node op_node(Op op, std::vector<int> inputs) {
        Node n;
        n.op = op;
        n.needs_grad = false;
        for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
        n.inputs = std::move(inputs);
        return n;
    }

    Var push(Node n) {
#ifdef TKGC_CHECK_FINITE
        if (n.op != Op::kParam && !all_finite(n.value))
            throw std::runtime_error("non-finite value out of primitive " + std::to_string(static_cast<int>(n.op)));
#endif
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void add_grad(int id, Tensor g) {
        if (!nodes_[id].needs_grad) return;
        if (grads_[id].empty())
            grads_[id] = std::move(g);
        else
            for (size_t k = 0; k < g.size(); ++k) grads_[id].v[k] += g.v[k];
    }

    void apply_vjp(int id, Node& n) {
        const Tensor& g = grads_[id];
        switch (n.op) {
            case Op::kConst:
            case Op::kParam:
                break;
            case Op::kMatmul: {
                const Tensor& A = val(n.inputs[0]);
                const Tensor& B = val(n.inputs[1]);
                if (nodes_[n.inputs[0]].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    kernels::matmul_nt(g.data(), B.data(), da.data(), g.rows, g.cols, B.rows);
                    add_grad(n.inputs[0], std::move(da));
                }
                if (nodes_[n.inputs[1]].needs_grad) {
                    Tensor db(B.rows, B.cols);
                    kernels::matmul_tn(A.data(), g.data(), db.data(), A.rows, A.cols, g.cols);
                    add_grad(n.inputs[1], std::move(db));
                }
                break;
            }
            case Op::kAdd:
                add_grad(n.inputs[0], g);
                add_grad(n.inputs[1], g);
                break;
            case Op::kMul: {
                const Tensor& A = val(n.inputs[0]);
                const Tensor& B = val(n.inputs[1]);
                if (nodes_[n.inputs[0]].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    kernels::elementwise2(g.data(), B.data(), da.data(), g.size(), [](T x, T y) { return x * y; });
                    add_grad(n.inputs[0], std::move(da));
                }
                if (nodes_[n.inputs[1]].needs_grad) {
                    Tensor db(B.rows, B.cols);
                    kernels::elementwise2(g.data(), A.data(), db.data(), g.size(), [](T x, T y) { return x * y; });
                    add_grad(n.inputs[1], std::move(db));
                }
                break;
            }
            case Op::kScale: {
                Tensor da(g.rows, g.cols);
                T f = n.scalar;
                kernels::elementwise(g.data(), da.data(), g.size(), [f](T x) { return f * x; });
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kLeakyRelu: {
                const Tensor& X = val(n.inputs[0]);
                Tensor da(g.rows, g.cols);
                T slope = n.scalar;
                for (size_t k = 0; k < g.size(); ++k) da.v[k] = X.v[k] >= T(0) ? g.v[k] : slope * g.v[k];
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kSigmoid: {
                const Tensor& Y = n.value;
                Tensor da(g.rows, g.cols);
                for (size_t k = 0; k < g.size(); ++k) da.v[k] = g.v[k] * Y.v[k] * (T(1) - Y.v[k]);
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kLog: {
                const Tensor& X = val(n.inputs[0]);
                Tensor da(g.rows, g.cols);
                for (size_t k = 0; k < g.size(); ++k) da.v[k] = g.v[k] / X.v[k];
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kConcatCols: {
                int at = 0;
                for (int in : n.inputs) {
                    const Tensor& A = val(in);
                    if (nodes_[in].needs_grad) {
                        Tensor da(A.rows, A.cols);
                        for (int r = 0; r < A.rows; ++r)
                            std::copy(g.row(r) + at, g.row(r) + at + A.cols, da.row(r));
                        add_grad(in, std::move(da));
                    }
                    at += A.cols;
                }
                break;
            }
            case Op::kConcatRows: {
                int at = 0;
                for (int in : n.inputs) {
                    const Tensor& A = val(in);
                    if (nodes_[in].needs_grad) {
                        Tensor da(A.rows, A.cols);
                        std::copy(g.v.begin() + static_cast<size_t>(at) * g.cols,
                                  g.v.begin() + static_cast<size_t>(at + A.rows) * g.cols, da.v.begin());
                        add_grad(in, std::move(da));
                    }
                    at += A.rows;
                }
                break;
            }
            case Op::kSliceCols: {
                const Tensor& A = val(n.inputs[0]);
                Tensor da(A.rows, A.cols);
                for (int r = 0; r < A.rows; ++r) std::copy(g.row(r), g.row(r) + n.a1, da.row(r) + n.a0);
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kGatherRows: {
                const Tensor& A = val(n.inputs[0]);
                Tensor da(A.rows, A.cols);
                kernels::scatter_add_rows(g.data(), g.rows, g.cols, n.index->data(), da.data());
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kRepeatRow: {
                const Tensor& A = val(n.inputs[0]);
                Tensor da(1, A.cols);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) da.v[c] += g.at(r, c);
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kRowwiseDot: {
                const Tensor& A = val(n.inputs[0]);
                const Tensor& B = val(n.inputs[1]);
                if (nodes_[n.inputs[0]].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    for (int r = 0; r < A.rows; ++r) {
                        T w = g.v[r];
                        for (int c = 0; c < A.cols; ++c) da.at(r, c) = w * B.at(r, c);
                    }
                    add_grad(n.inputs[0], std::move(da));
                }
                if (nodes_[n.inputs[1]].needs_grad) {
                    Tensor db(B.rows, B.cols);
                    for (int r = 0; r < B.rows; ++r) {
                        T w = g.v[r];
                        for (int c = 0; c < B.cols; ++c) db.at(r, c) = w * A.at(r, c);
                    }
                    add_grad(n.inputs[1], std::move(db));
                }
                break;
            }
            case Op::kScaleRows: {
                const Tensor& A = val(n.inputs[0]);
                const Tensor& S = val(n.inputs[1]);
                if (nodes_[n.inputs[0]].needs_grad) {
                    Tensor da(A.rows, A.cols);
                    for (int r = 0; r < A.rows; ++r) {
                        T w = S.v[r];
                        for (int c = 0; c < A.cols; ++c) da.at(r, c) = w * g.at(r, c);
                    }
                    add_grad(n.inputs[0], std::move(da));
                }
                if (nodes_[n.inputs[1]].needs_grad) {
                    Tensor ds(S.rows, 1);
                    for (int r = 0; r < A.rows; ++r) {
                        T acc = T(0);
                        for (int c = 0; c < A.cols; ++c) acc += g.at(r, c) * A.at(r, c);
                        ds.v[r] = acc;
                    }
                    add_grad(n.inputs[1], std::move(ds));
                }
                break;
            }
            case Op::kSegmentSum: {
                const Tensor& A = val(n.inputs[0]);
                Tensor da(A.rows, A.cols);
                kernels::segment_sum_backward(g.data(), g.cols, *n.seg, da.data());
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kSegmentSoftmax: {
                const Tensor& Y = n.value;
                Tensor da(Y.rows, 1);
                kernels::segment_softmax_backward(Y.data(), g.data(), *n.seg, da.data());
                add_grad(n.inputs[0], std::move(da));
                break;
            }
            case Op::kSumAll: {
                const Tensor& A = val(n.inputs[0]);
                Tensor da(A.rows, A.cols);
                da.fill(g.v[0]);
                add_grad(n.inputs[0], std::move(da));
                break;
            }
        }
        if (n.op != Op::kParam) grads_[id] = Tensor();  // free as we go; params keep theirs
    }
};

}  // namespace tkgc
