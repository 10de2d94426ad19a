#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"

namespace ratnmt::autodiff {

// Dense row-major 2-D tensor. Vectors are 1xN.
template <typename T>
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), T(0)) {}

  static Tensor zeros(int64_t r, int64_t c) { return Tensor(r, c); }
  static Tensor full(int64_t r, int64_t c, T v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  int64_t numel() const { return rows * cols; }
  T& operator()(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
  const T& operator()(int64_t i, int64_t j) const {
    return data[static_cast<size_t>(i * cols + j)];
  }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, int64_t r, int64_t c)
      : name(std::move(n)), value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(T(0)); }
};

namespace detail {

template <typename T>
inline void check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  for (T v : t.data) {
    if (!std::isfinite(v)) throw InternalError(std::string("non-finite value after ") + op);
  }
#else
  (void)t;
  (void)op;
#endif
}

[[noreturn]] inline void shape_error(const char* op, const std::string& detail) {
  throw InternalError(std::string(op) + ": shape mismatch (" + detail + ")");
}

}  // namespace detail

// Reverse-mode tape. Nodes are created in forward order; backward replays the
// recorded closures in reverse. One graph per training step; freed afterwards.
template <typename T>
class Graph {
 public:
  using NodeId = int32_t;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].val; }
  const Tensor<T>& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

  NodeId constant(Tensor<T> v) { return push(std::move(v), nullptr); }

  // Parameter leaf; backward accumulates into p.grad.
  NodeId leaf(Parameter<T>& p) {
    Parameter<T>* pp = &p;
    NodeId id = push(Tensor<T>(p.value), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, pp]() {
      const Tensor<T>& g = nodes_[static_cast<size_t>(id)].grad;
      for (size_t i = 0; i < g.data.size(); ++i) pp->grad.data[i] += g.data[i];
    };
    return id;
  }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (A.cols != B.rows) {
      detail::shape_error("matmul", A.shape_str() + " * " + B.shape_str());
    }
    Tensor<T> C(A.rows, B.cols);
    for (int64_t i = 0; i < A.rows; ++i) {
      const T* arow = &A.data[static_cast<size_t>(i * A.cols)];
      T* crow = &C.data[static_cast<size_t>(i * C.cols)];
      for (int64_t k = 0; k < A.cols; ++k) {
        T aik = arow[k];
        if (aik == T(0)) continue;
        const T* brow = &B.data[static_cast<size_t>(k * B.cols)];
        for (int64_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
      }
    }
    detail::check_finite(C, "matmul");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, b]() {
      const Tensor<T>& dC = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& A = value(a);
      const Tensor<T>& B = value(b);
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      Tensor<T>& dB = nodes_[static_cast<size_t>(b)].grad;
      // dA += dC * B^T
      for (int64_t i = 0; i < A.rows; ++i) {
        for (int64_t k = 0; k < A.cols; ++k) {
          T acc = T(0);
          for (int64_t j = 0; j < B.cols; ++j) acc += dC(i, j) * B(k, j);
          dA(i, k) += acc;
        }
      }
      // dB += A^T * dC
      for (int64_t k = 0; k < B.rows; ++k) {
        for (int64_t j = 0; j < B.cols; ++j) {
          T acc = T(0);
          for (int64_t i = 0; i < A.rows; ++i) acc += A(i, k) * dC(i, j);
          dB(k, j) += acc;
        }
      }
    };
    return id;
  }

  NodeId add(NodeId a, NodeId b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) detail::shape_error("add", A.shape_str() + " + " + B.shape_str());
    Tensor<T> C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
    detail::check_finite(C, "add");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, b]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      Tensor<T>& dB = nodes_[static_cast<size_t>(b)].grad;
      for (size_t i = 0; i < d.data.size(); ++i) {
        dA.data[i] += d.data[i];
        dB.data[i] += d.data[i];
      }
    };
    return id;
  }

  // a: m x n, row: 1 x n, broadcast over rows.
  NodeId add_row_broadcast(NodeId a, NodeId row) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& R = value(row);
    if (R.rows != 1 || R.cols != A.cols) {
      detail::shape_error("add_row_broadcast", A.shape_str() + " + " + R.shape_str());
    }
    Tensor<T> C = A;
    for (int64_t i = 0; i < C.rows; ++i) {
      for (int64_t j = 0; j < C.cols; ++j) C(i, j) += R(0, j);
    }
    detail::check_finite(C, "add_row_broadcast");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, row]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      Tensor<T>& dR = nodes_[static_cast<size_t>(row)].grad;
      for (int64_t i = 0; i < d.rows; ++i) {
        for (int64_t j = 0; j < d.cols; ++j) {
          dA(i, j) += d(i, j);
          dR(0, j) += d(i, j);
        }
      }
    };
    return id;
  }

  NodeId scale(NodeId a, T s) {
    const Tensor<T>& A = value(a);
    Tensor<T> C = A;
    for (auto& v : C.data) v *= s;
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, s]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (size_t i = 0; i < d.data.size(); ++i) dA.data[i] += s * d.data[i];
    };
    return id;
  }

  // Elementwise product with a fixed mask; dropout with externally drawn masks.
  NodeId dropout(NodeId a, Tensor<T> mask) {
    const Tensor<T>& A = value(a);
    if (!A.same_shape(mask)) {
      detail::shape_error("dropout", A.shape_str() + " vs mask " + mask.shape_str());
    }
    auto m = std::make_shared<Tensor<T>>(std::move(mask));
    Tensor<T> C = A;
    for (size_t i = 0; i < C.data.size(); ++i) C.data[i] *= m->data[i];
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, m]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (size_t i = 0; i < d.data.size(); ++i) dA.data[i] += d.data[i] * m->data[i];
    };
    return id;
  }

  NodeId relu(NodeId a) {
    const Tensor<T>& A = value(a);
    Tensor<T> C = A;
    for (auto& v : C.data) v = v > T(0) ? v : T(0);
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& A = value(a);
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (size_t i = 0; i < d.data.size(); ++i) {
        if (A.data[i] > T(0)) dA.data[i] += d.data[i];
      }
    };
    return id;
  }

  NodeId transpose(NodeId a) {
    const Tensor<T>& A = value(a);
    Tensor<T> C(A.cols, A.rows);
    for (int64_t i = 0; i < A.rows; ++i) {
      for (int64_t j = 0; j < A.cols; ++j) C(j, i) = A(i, j);
    }
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (int64_t i = 0; i < d.rows; ++i) {
        for (int64_t j = 0; j < d.cols; ++j) dA(j, i) += d(i, j);
      }
    };
    return id;
  }

  NodeId slice_cols(NodeId a, int64_t begin, int64_t end) {
    const Tensor<T>& A = value(a);
    if (begin < 0 || end > A.cols || begin >= end) {
      detail::shape_error("slice_cols", A.shape_str() + " [" + std::to_string(begin) + "," +
                                            std::to_string(end) + ")");
    }
    Tensor<T> C(A.rows, end - begin);
    for (int64_t i = 0; i < A.rows; ++i) {
      for (int64_t j = begin; j < end; ++j) C(i, j - begin) = A(i, j);
    }
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a, begin]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (int64_t i = 0; i < d.rows; ++i) {
        for (int64_t j = 0; j < d.cols; ++j) dA(i, begin + j) += d(i, j);
      }
    };
    return id;
  }

  NodeId concat_cols(std::span<const NodeId> parts) {
    if (parts.empty()) throw InternalError("concat_cols: no inputs");
    int64_t rows = value(parts[0]).rows;
    int64_t cols = 0;
    for (NodeId p : parts) {
      if (value(p).rows != rows) detail::shape_error("concat_cols", "row counts differ");
      cols += value(p).cols;
    }
    Tensor<T> C(rows, cols);
    int64_t off = 0;
    for (NodeId p : parts) {
      const Tensor<T>& P = value(p);
      for (int64_t i = 0; i < rows; ++i) {
        for (int64_t j = 0; j < P.cols; ++j) C(i, off + j) = P(i, j);
      }
      off += P.cols;
    }
    std::vector<NodeId> ps(parts.begin(), parts.end());
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, ps]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      int64_t off = 0;
      for (NodeId p : ps) {
        Tensor<T>& dP = nodes_[static_cast<size_t>(p)].grad;
        for (int64_t i = 0; i < d.rows; ++i) {
          for (int64_t j = 0; j < dP.cols; ++j) dP(i, j) += d(i, off + j);
        }
        off += dP.cols;
      }
    };
    return id;
  }

  NodeId concat_rows(std::span<const NodeId> parts) {
    if (parts.empty()) throw InternalError("concat_rows: no inputs");
    int64_t cols = value(parts[0]).cols;
    int64_t rows = 0;
    for (NodeId p : parts) {
      if (value(p).cols != cols) detail::shape_error("concat_rows", "column counts differ");
      rows += value(p).rows;
    }
    Tensor<T> C(rows, cols);
    int64_t off = 0;
    for (NodeId p : parts) {
      const Tensor<T>& P = value(p);
      for (int64_t i = 0; i < P.rows; ++i) {
        for (int64_t j = 0; j < cols; ++j) C(off + i, j) = P(i, j);
      }
      off += P.rows;
    }
    std::vector<NodeId> ps(parts.begin(), parts.end());
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, ps]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      int64_t off = 0;
      for (NodeId p : ps) {
        Tensor<T>& dP = nodes_[static_cast<size_t>(p)].grad;
        for (int64_t i = 0; i < dP.rows; ++i) {
          for (int64_t j = 0; j < d.cols; ++j) dP(i, j) += d(off + i, j);
        }
        off += dP.rows;
      }
    };
    return id;
  }

  NodeId softmax_rows(NodeId a) {
    const Tensor<T>& A = value(a);
    Tensor<T> C(A.rows, A.cols);
    for (int64_t i = 0; i < A.rows; ++i) {
      T mx = A(i, 0);
      for (int64_t j = 1; j < A.cols; ++j) mx = std::max(mx, A(i, j));
      T sum = T(0);
      for (int64_t j = 0; j < A.cols; ++j) {
        T e = std::exp(A(i, j) - mx);
        C(i, j) = e;
        sum += e;
      }
      for (int64_t j = 0; j < A.cols; ++j) C(i, j) /= sum;
    }
    detail::check_finite(C, "softmax");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& Y = value(id);
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (int64_t i = 0; i < d.rows; ++i) {
        T dot = T(0);
        for (int64_t j = 0; j < d.cols; ++j) dot += d(i, j) * Y(i, j);
        for (int64_t j = 0; j < d.cols; ++j) dA(i, j) += Y(i, j) * (d(i, j) - dot);
      }
    };
    return id;
  }

  NodeId log_softmax_rows(NodeId a) {
    const Tensor<T>& A = value(a);
    Tensor<T> C(A.rows, A.cols);
    for (int64_t i = 0; i < A.rows; ++i) {
      T mx = A(i, 0);
      for (int64_t j = 1; j < A.cols; ++j) mx = std::max(mx, A(i, j));
      T sum = T(0);
      for (int64_t j = 0; j < A.cols; ++j) sum += std::exp(A(i, j) - mx);
      T lse = mx + std::log(sum);
      for (int64_t j = 0; j < A.cols; ++j) C(i, j) = A(i, j) - lse;
    }
    detail::check_finite(C, "log_softmax");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, a]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& L = value(id);
      Tensor<T>& dA = nodes_[static_cast<size_t>(a)].grad;
      for (int64_t i = 0; i < d.rows; ++i) {
        T dsum = T(0);
        for (int64_t j = 0; j < d.cols; ++j) dsum += d(i, j);
        for (int64_t j = 0; j < d.cols; ++j) {
          dA(i, j) += d(i, j) - std::exp(L(i, j)) * dsum;
        }
      }
    };
    return id;
  }

  // Per-row layer normalization with affine gain/bias (both 1 x n).
  NodeId layer_norm_rows(NodeId x, NodeId gain, NodeId bias, T eps = T(1e-5)) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& G = value(gain);
    const Tensor<T>& B = value(bias);
    if (G.rows != 1 || B.rows != 1 || G.cols != X.cols || B.cols != X.cols) {
      detail::shape_error("layer_norm", X.shape_str() + " with affine " + G.shape_str());
    }
    auto yhat = std::make_shared<Tensor<T>>(X.rows, X.cols);  // normalized, pre-affine
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(X.rows));
    Tensor<T> C(X.rows, X.cols);
    T n = static_cast<T>(X.cols);
    for (int64_t i = 0; i < X.rows; ++i) {
      T mean = T(0);
      for (int64_t j = 0; j < X.cols; ++j) mean += X(i, j);
      mean /= n;
      T var = T(0);
      for (int64_t j = 0; j < X.cols; ++j) {
        T dv = X(i, j) - mean;
        var += dv * dv;
      }
      var /= n;
      T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[static_cast<size_t>(i)] = is;
      for (int64_t j = 0; j < X.cols; ++j) {
        T y = (X(i, j) - mean) * is;
        (*yhat)(i, j) = y;
        C(i, j) = y * G(0, j) + B(0, j);
      }
    }
    detail::check_finite(C, "layer_norm");
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, x, gain, bias, yhat, inv_std]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      const Tensor<T>& G = value(gain);
      Tensor<T>& dX = nodes_[static_cast<size_t>(x)].grad;
      Tensor<T>& dG = nodes_[static_cast<size_t>(gain)].grad;
      Tensor<T>& dB = nodes_[static_cast<size_t>(bias)].grad;
      T n = static_cast<T>(d.cols);
      for (int64_t i = 0; i < d.rows; ++i) {
        T mean_dy = T(0), mean_dyy = T(0);
        for (int64_t j = 0; j < d.cols; ++j) {
          T dy = d(i, j) * G(0, j);
          T y = (*yhat)(i, j);
          mean_dy += dy;
          mean_dyy += dy * y;
          dG(0, j) += d(i, j) * y;
          dB(0, j) += d(i, j);
        }
        mean_dy /= n;
        mean_dyy /= n;
        T is = (*inv_std)[static_cast<size_t>(i)];
        for (int64_t j = 0; j < d.cols; ++j) {
          T dy = d(i, j) * G(0, j);
          T y = (*yhat)(i, j);
          dX(i, j) += (dy - mean_dy - y * mean_dyy) * is;
        }
      }
    };
    return id;
  }

  // Gathers rows of an embedding node: out row r = emb[ids[r]].
  NodeId embedding_lookup(NodeId emb, std::vector<int32_t> ids) {
    const Tensor<T>& E = value(emb);
    for (int32_t v : ids) {
      if (v < 0 || v >= E.rows) {
        throw InternalError("embedding_lookup: index " + std::to_string(v) + " out of range [0," +
                            std::to_string(E.rows) + ")");
      }
    }
    Tensor<T> C(static_cast<int64_t>(ids.size()), E.cols);
    for (size_t r = 0; r < ids.size(); ++r) {
      for (int64_t j = 0; j < E.cols; ++j) {
        C(static_cast<int64_t>(r), j) = E(ids[r], j);
      }
    }
    auto ids_p = std::make_shared<std::vector<int32_t>>(std::move(ids));
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, emb, ids_p]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dE = nodes_[static_cast<size_t>(emb)].grad;
      for (size_t r = 0; r < ids_p->size(); ++r) {
        for (int64_t j = 0; j < d.cols; ++j) {
          dE((*ids_p)[r], j) += d(static_cast<int64_t>(r), j);
        }
      }
    };
    return id;
  }

  // CBOW bag aggregation: out row r = mean of emb rows listed in bags[r].
  NodeId bag_mean_embedding(NodeId emb, std::vector<std::vector<int32_t>> bags) {
    const Tensor<T>& E = value(emb);
    Tensor<T> C(static_cast<int64_t>(bags.size()), E.cols);
    for (size_t r = 0; r < bags.size(); ++r) {
      if (bags[r].empty()) throw InternalError("bag_mean_embedding: empty bag");
      T inv = T(1) / static_cast<T>(bags[r].size());
      for (int32_t v : bags[r]) {
        if (v < 0 || v >= E.rows) throw InternalError("bag_mean_embedding: index out of range");
        for (int64_t j = 0; j < E.cols; ++j) {
          C(static_cast<int64_t>(r), j) += E(v, j) * inv;
        }
      }
    }
    auto bags_p = std::make_shared<std::vector<std::vector<int32_t>>>(std::move(bags));
    NodeId id = push(std::move(C), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, emb, bags_p]() {
      const Tensor<T>& d = nodes_[static_cast<size_t>(id)].grad;
      Tensor<T>& dE = nodes_[static_cast<size_t>(emb)].grad;
      for (size_t r = 0; r < bags_p->size(); ++r) {
        T inv = T(1) / static_cast<T>((*bags_p)[r].size());
        for (int32_t v : (*bags_p)[r]) {
          for (int64_t j = 0; j < d.cols; ++j) {
            dE(v, j) += d(static_cast<int64_t>(r), j) * inv;
          }
        }
      }
    };
    return id;
  }

  // Sum over rows of -log softmax(logits)[target]; returns a 1x1 node.
  // Gradient of each row is softmax(row) - onehot(target).
  NodeId cross_entropy_sum(NodeId logits, std::vector<int32_t> targets) {
    const Tensor<T>& L = value(logits);
    if (static_cast<int64_t>(targets.size()) != L.rows) {
      detail::shape_error("cross_entropy", "targets " + std::to_string(targets.size()) +
                                               " vs logits " + L.shape_str());
    }
    auto probs = std::make_shared<Tensor<T>>(L.rows, L.cols);
    T loss = T(0);
    for (int64_t i = 0; i < L.rows; ++i) {
      int32_t tgt = targets[static_cast<size_t>(i)];
      if (tgt < 0 || tgt >= L.cols) {
        throw InternalError("cross_entropy: target " + std::to_string(tgt) + " out of range [0," +
                            std::to_string(L.cols) + ")");
      }
      T mx = L(i, 0);
      for (int64_t j = 1; j < L.cols; ++j) mx = std::max(mx, L(i, j));
      T sum = T(0);
      for (int64_t j = 0; j < L.cols; ++j) {
        T e = std::exp(L(i, j) - mx);
        (*probs)(i, j) = e;
        sum += e;
      }
      for (int64_t j = 0; j < L.cols; ++j) (*probs)(i, j) /= sum;
      T lse = mx + std::log(sum);
      loss += lse - L(i, tgt);
    }
    Tensor<T> out(1, 1);
    out(0, 0) = loss;
    detail::check_finite(out, "cross_entropy");
    auto tgt_p = std::make_shared<std::vector<int32_t>>(std::move(targets));
    NodeId id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, logits, probs, tgt_p]() {
      T dloss = nodes_[static_cast<size_t>(id)].grad(0, 0);
      Tensor<T>& dL = nodes_[static_cast<size_t>(logits)].grad;
      for (int64_t i = 0; i < probs->rows; ++i) {
        for (int64_t j = 0; j < probs->cols; ++j) {
          T g = (*probs)(i, j);
          if (j == (*tgt_p)[static_cast<size_t>(i)]) g -= T(1);
          dL(i, j) += g * dloss;
        }
      }
    };
    return id;
  }

  // Sums a list of 1x1 nodes.
  NodeId sum_scalars(std::span<const NodeId> terms) {
    if (terms.empty()) throw InternalError("sum_scalars: no inputs");
    Tensor<T> out(1, 1);
    for (NodeId t : terms) {
      if (value(t).numel() != 1) detail::shape_error("sum_scalars", "non-scalar input");
      out(0, 0) += value(t)(0, 0);
    }
    std::vector<NodeId> ts(terms.begin(), terms.end());
    NodeId id = push(std::move(out), nullptr);
    nodes_[static_cast<size_t>(id)].back = [this, id, ts]() {
      T d = nodes_[static_cast<size_t>(id)].grad(0, 0);
      for (NodeId t : ts) nodes_[static_cast<size_t>(t)].grad(0, 0) += d;
    };
    return id;
  }

  // Seeds the loss gradient and replays the tape in reverse. Node grads are
  // scratch state reset per call, so calling backward twice with upstreams u
  // and v accumulates the same parameter gradients as one call with u + v.
  void backward(NodeId loss) {
    backward_with(loss, T(1));
  }

  void backward_with(NodeId loss, T upstream) {
    if (value(loss).numel() != 1) throw InternalError("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad.fill(T(0));
    nodes_[static_cast<size_t>(loss)].grad(0, 0) = upstream;
    for (size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back();
    }
  }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    std::function<void()> back;
  };

  NodeId push(Tensor<T> v, std::function<void()> back) {
    Node n;
    n.grad = Tensor<T>(v.rows, v.cols);
    n.val = std::move(v);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// Adam with bias correction over an explicit parameter list. step() applies
// the update, zeroes the grads, and advances t.
template <typename T>
class AdamOptimizer {
 public:
  struct Betas {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamOptimizer(std::vector<Parameter<T>*> params, Betas betas = {})
      : params_(std::move(params)), betas_(betas) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void step(double lr) {
    ++t_;
    T b1 = static_cast<T>(betas_.beta1);
    T b2 = static_cast<T>(betas_.beta2);
    T corr1 = static_cast<T>(1.0 / (1.0 - std::pow(betas_.beta1, static_cast<double>(t_))));
    T corr2 = static_cast<T>(1.0 / (1.0 - std::pow(betas_.beta2, static_cast<double>(t_))));
    T eps = static_cast<T>(betas_.eps);
    T step_size = static_cast<T>(lr);
    for (size_t p = 0; p < params_.size(); ++p) {
      auto& value = params_[p]->value.data;
      auto& grad = params_[p]->grad.data;
      auto& m = m_[p].data;
      auto& v = v_[p].data;
      for (size_t i = 0; i < value.size(); ++i) {
        T g = grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        T mhat = m[i] * corr1;
        T vhat = v[i] * corr2;
        value[i] -= step_size * mhat / (std::sqrt(vhat) + eps);
        grad[i] = T(0);
      }
    }
  }

  int64_t step_count() const { return t_; }
  const std::vector<Parameter<T>*>& params() const { return params_; }

 private:
  std::vector<Parameter<T>*> params_;
  Betas betas_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  int64_t t_ = 0;
};

// Central finite differences against analytic gradients.
// loss_fn(true) must populate param grads (one full backward); loss_fn(false)
// only evaluates the loss. Returns the max relative error over the sampled
// coordinates: |fd - an| / max(|fd|, |an|, 1e-8).
template <typename T>
double grad_check(const std::function<double(bool with_grad)>& loss_fn,
                  std::span<Parameter<T>* const> params, double epsilon,
                  int max_coords_per_param = 0, uint64_t seed = 12345) {
  static_assert(std::is_same_v<T, double>, "grad_check runs in 64-bit mode");
  for (auto* p : params) p->zero_grad();
  loss_fn(true);
  std::vector<Tensor<T>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  Rng rng(seed);
  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<T>* p = params[pi];
    int64_t n = p->value.numel();
    std::vector<int64_t> coords;
    if (max_coords_per_param <= 0 || n <= max_coords_per_param) {
      coords.resize(static_cast<size_t>(n));
      for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      for (int c = 0; c < max_coords_per_param; ++c) {
        coords.push_back(static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n))));
      }
    }
    for (int64_t i : coords) {
      T saved = p->value.data[static_cast<size_t>(i)];
      p->value.data[static_cast<size_t>(i)] = saved + static_cast<T>(epsilon);
      double lp = loss_fn(false);
      p->value.data[static_cast<size_t>(i)] = saved - static_cast<T>(epsilon);
      double lm = loss_fn(false);
      p->value.data[static_cast<size_t>(i)] = saved;
      double fd = (lp - lm) / (2.0 * epsilon);
      double an = static_cast<double>(analytic[pi].data[static_cast<size_t>(i)]);
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  for (auto* p : params) p->zero_grad();
  return max_rel;
}

}  // namespace ratnmt::autodiff
