#include "sutra/ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "sutra/errors.hpp"

namespace sutra {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

void require_ndim(const Tensor& x, int nd, const char* op) {
  if (x.ndim() != nd) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(nd) +
                     "-d tensor, got shape " + shape_str(x.shape()));
  }
}

// Data handle captured by backward closures; keeps input values alive.
using DataPtr = std::shared_ptr<std::vector<double>>;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b},
                         [](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           for (int p = 0; p < 2; ++p) {
                             if (!pg[p]) continue;
                             for (size_t i = 0; i < g.size(); ++i) (*pg[p])[i] += g[i];
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b},
                         [](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (pg[0])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                           if (pg[1])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(a.shape(), std::move(out), {a, b},
                         [da, db](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (pg[0])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * (*db)[i];
                           if (pg[1])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * (*da)[i];
                         });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) {
    if (b.data()[i] == 0.0) throw NumericError("div: zero denominator");
    out[i] = a.data()[i] / b.data()[i];
  }
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(
      a.shape(), std::move(out), {a, b},
      [da, db](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        for (size_t i = 0; i < g.size(); ++i) {
          double bi = (*db)[i];
          if (pg[0]) (*pg[0])[i] += g[i] / bi;
          if (pg[1]) (*pg[1])[i] -= g[i] * (*da)[i] / (bi * bi);
        }
      });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [c](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (pg[0])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * c;
                         });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (pg[0])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                         });
}

Tensor silu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * sigmoid(a.data()[i]);
  DataPtr da = a.impl()->data;
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [da](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < g.size(); ++i) {
                             double s = sigmoid((*da)[i]);
                             (*pg[0])[i] += g[i] * s * (1.0 + (*da)[i] * (1.0 - s));
                           }
                         });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  DataPtr da = a.impl()->data;
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [da](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < g.size(); ++i)
                             if ((*da)[i] > 0.0) (*pg[0])[i] += g[i];
                         });
}

Tensor sqrt_elem(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) {
    if (a.data()[i] < 0.0) throw NumericError("sqrt_elem: negative input");
    out[i] = std::sqrt(a.data()[i]);
  }
  DataPtr hold = std::make_shared<std::vector<double>>(out);
  return Tensor::from_op(a.shape(), std::move(out), {a},
                         [hold](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < g.size(); ++i)
                             (*pg[0])[i] += g[i] * 0.5 / (*hold)[i];
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("reshape: non-positive dim in " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  if (n != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data(), x.data() + x.numel());
  return Tensor::from_op(std::move(shape), std::move(out), {x},
                         [](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                         });
}

Tensor permute_0213(const Tensor& x) {
  require_ndim(x, 4, "permute_0213");
  const int A = x.dim(0), B = x.dim(1), C = x.dim(2), D = x.dim(3);
  std::vector<double> out(x.numel());
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const double* src = x.data() + (((static_cast<size_t>(a) * B + b) * C + c) * D);
        double* dst = out.data() + (((static_cast<size_t>(a) * C + c) * B + b) * D);
        std::copy(src, src + D, dst);
      }
  return Tensor::from_op(
      {A, C, B, D}, std::move(out), {x},
      [A, B, C, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (!pg[0]) return;
        for (int a = 0; a < A; ++a)
          for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
              const double* src = g.data() + (((static_cast<size_t>(a) * C + c) * B + b) * D);
              double* dst = pg[0]->data() + (((static_cast<size_t>(a) * B + b) * C + c) * D);
              for (int d = 0; d < D; ++d) dst[d] += src[d];
            }
      });
}

Tensor slice_lastdim(const Tensor& x, int offset, int len) {
  if (x.ndim() < 1) throw ShapeError("slice_lastdim: scalar input");
  const int D = x.dim(x.ndim() - 1);
  if (offset < 0 || len <= 0 || offset + len > D) {
    throw IndexError("slice_lastdim: range [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") outside dim " + std::to_string(D));
  }
  const size_t rows = x.numel() / static_cast<size_t>(D);
  std::vector<double> out(rows * static_cast<size_t>(len));
  for (size_t r = 0; r < rows; ++r)
    std::copy(x.data() + r * D + offset, x.data() + r * D + offset + len,
              out.data() + r * len);
  Shape s = x.shape();
  s.back() = len;
  return Tensor::from_op(std::move(s), std::move(out), {x},
                         [rows, D, offset, len](const GradBuffer& g,
                                                const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t r = 0; r < rows; ++r)
                             for (int j = 0; j < len; ++j)
                               (*pg[0])[r * D + offset + j] += g[r * len + j];
                         });
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& idx) {
  require_ndim(x, 2, "gather_rows");
  const int R = x.dim(0), D = x.dim(1);
  for (int i : idx) {
    if (i < 0 || i >= R)
      throw IndexError("gather_rows: row " + std::to_string(i) + " outside [0," +
                       std::to_string(R) + ")");
  }
  const int r = static_cast<int>(idx.size());
  if (r == 0) throw ShapeError("gather_rows: empty index list");
  std::vector<double> out(static_cast<size_t>(r) * D);
  for (int i = 0; i < r; ++i)
    std::copy(x.data() + static_cast<size_t>(idx[i]) * D,
              x.data() + static_cast<size_t>(idx[i]) * D + D, out.data() + static_cast<size_t>(i) * D);
  return Tensor::from_op({r, D}, std::move(out), {x},
                         [idx, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < idx.size(); ++i)
                             for (int d = 0; d < D; ++d)
                               (*pg[0])[static_cast<size_t>(idx[i]) * D + d] += g[i * D + d];
                         });
}

Tensor scatter_rows(int total_rows, const std::vector<int>& idx, const Tensor& y) {
  require_ndim(y, 2, "scatter_rows");
  if (static_cast<int>(idx.size()) != y.dim(0))
    throw ShapeError("scatter_rows: " + std::to_string(idx.size()) + " indices for " +
                     std::to_string(y.dim(0)) + " rows");
  const int D = y.dim(1);
  for (int i : idx) {
    if (i < 0 || i >= total_rows)
      throw IndexError("scatter_rows: row " + std::to_string(i) + " outside [0," +
                       std::to_string(total_rows) + ")");
  }
  std::vector<double> out(static_cast<size_t>(total_rows) * D, 0.0);
  for (size_t i = 0; i < idx.size(); ++i)
    for (int d = 0; d < D; ++d)
      out[static_cast<size_t>(idx[i]) * D + d] += y.data()[i * D + d];
  return Tensor::from_op({total_rows, D}, std::move(out), {y},
                         [idx, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < idx.size(); ++i)
                             for (int d = 0; d < D; ++d)
                               (*pg[0])[i * D + d] += g[static_cast<size_t>(idx[i]) * D + d];
                         });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_ndim(x, 2, "scale_rows");
  require_ndim(w, 1, "scale_rows");
  const int R = x.dim(0), D = x.dim(1);
  if (w.dim(0) != R)
    throw ShapeError("scale_rows: " + std::to_string(w.dim(0)) + " weights for " +
                     std::to_string(R) + " rows");
  std::vector<double> out(x.numel());
  for (int i = 0; i < R; ++i)
    for (int d = 0; d < D; ++d)
      out[static_cast<size_t>(i) * D + d] = x.data()[static_cast<size_t>(i) * D + d] * w.data()[i];
  DataPtr dx = x.impl()->data, dw = w.impl()->data;
  return Tensor::from_op(
      {R, D}, std::move(out), {x, w},
      [dx, dw, R, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        for (int i = 0; i < R; ++i)
          for (int d = 0; d < D; ++d) {
            const size_t k = static_cast<size_t>(i) * D + d;
            if (pg[0]) (*pg[0])[k] += g[k] * (*dw)[i];
            if (pg[1]) (*pg[1])[i] += g[k] * (*dx)[k];
          }
      });
}

Tensor add_per_batch_row(const Tensor& x, const Tensor& r) {
  require_ndim(x, 3, "add_per_batch_row");
  require_ndim(r, 2, "add_per_batch_row");
  const int B = x.dim(0), T = x.dim(1), D = x.dim(2);
  if (r.dim(0) != B || r.dim(1) != D)
    throw ShapeError("add_per_batch_row: rows " + shape_str(r.shape()) + " vs input " +
                     shape_str(x.shape()));
  std::vector<double> out(x.numel());
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d) {
        const size_t k = (static_cast<size_t>(b) * T + t) * D + d;
        out[k] = x.data()[k] + r.data()[static_cast<size_t>(b) * D + d];
      }
  return Tensor::from_op(
      x.shape(), std::move(out), {x, r},
      [B, T, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (pg[0])
          for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
        if (pg[1])
          for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t)
              for (int d = 0; d < D; ++d)
                (*pg[1])[static_cast<size_t>(b) * D + d] +=
                    g[(static_cast<size_t>(b) * T + t) * D + d];
      });
}

Tensor mean_axis1(const Tensor& x) {
  require_ndim(x, 3, "mean_axis1");
  const int B = x.dim(0), T = x.dim(1), D = x.dim(2);
  std::vector<double> out(static_cast<size_t>(B) * D, 0.0);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < D; ++d)
        out[static_cast<size_t>(b) * D + d] += x.data()[(static_cast<size_t>(b) * T + t) * D + d];
  for (double& v : out) v /= T;
  return Tensor::from_op({B, D}, std::move(out), {x},
                         [B, T, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (int b = 0; b < B; ++b)
                             for (int t = 0; t < T; ++t)
                               for (int d = 0; d < D; ++d)
                                 (*pg[0])[(static_cast<size_t>(b) * T + t) * D + d] +=
                                     g[static_cast<size_t>(b) * D + d] / T;
                         });
}

Tensor masked_mean_axis1(const Tensor& x, const Tensor& mask) {
  require_ndim(x, 3, "masked_mean_axis1");
  require_ndim(mask, 2, "masked_mean_axis1");
  const int B = x.dim(0), T = x.dim(1), D = x.dim(2);
  if (mask.dim(0) != B || mask.dim(1) != T)
    throw ShapeError("masked_mean_axis1: mask " + shape_str(mask.shape()) + " vs input " +
                     shape_str(x.shape()));
  std::vector<double> counts(B, 0.0);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < T; ++t) counts[b] += mask.data()[static_cast<size_t>(b) * T + t];
    if (counts[b] <= 0.0) throw DataError("masked_mean_axis1: empty mask row");
  }
  std::vector<double> out(static_cast<size_t>(B) * D, 0.0);
  for (int b = 0; b < B; ++b)
    for (int t = 0; t < T; ++t) {
      const double m = mask.data()[static_cast<size_t>(b) * T + t];
      if (m == 0.0) continue;
      for (int d = 0; d < D; ++d)
        out[static_cast<size_t>(b) * D + d] +=
            m * x.data()[(static_cast<size_t>(b) * T + t) * D + d];
    }
  for (int b = 0; b < B; ++b)
    for (int d = 0; d < D; ++d) out[static_cast<size_t>(b) * D + d] /= counts[b];
  DataPtr dm = mask.impl()->data;
  return Tensor::from_op(
      {B, D}, std::move(out), {x, mask},
      [dm, counts, B, T, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (!pg[0]) return;
        for (int b = 0; b < B; ++b)
          for (int t = 0; t < T; ++t) {
            const double m = (*dm)[static_cast<size_t>(b) * T + t];
            if (m == 0.0) continue;
            for (int d = 0; d < D; ++d)
              (*pg[0])[(static_cast<size_t>(b) * T + t) * D + d] +=
                  m * g[static_cast<size_t>(b) * D + d] / counts[b];
          }
      });
}

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (size_t i = 0; i < x.numel(); ++i) s += x.data()[i];
  const size_t n = x.numel();
  return Tensor::from_op({1}, {s}, {x},
                         [n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (size_t i = 0; i < n; ++i) (*pg[0])[i] += g[0];
                         });
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

Tensor sum_lastdim(const Tensor& x) {
  require_ndim(x, 2, "sum_lastdim");
  const int N = x.dim(0), D = x.dim(1);
  std::vector<double> out(N, 0.0);
  for (int i = 0; i < N; ++i)
    for (int d = 0; d < D; ++d) out[i] += x.data()[static_cast<size_t>(i) * D + d];
  return Tensor::from_op({N}, std::move(out), {x},
                         [N, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (!pg[0]) return;
                           for (int i = 0; i < N; ++i)
                             for (int d = 0; d < D; ++d)
                               (*pg[0])[static_cast<size_t>(i) * D + d] += g[i];
                         });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_ndim(a, 2, "matmul");
  require_ndim(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(m) * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.data(), m, k) * ConstMap(b.data(), k, n);
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(
      {m, n}, std::move(out), {a, b},
      [da, db, m, k, n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        ConstMap gm(g.data(), m, n);
        if (pg[0])
          MutMap(pg[0]->data(), m, k).noalias() += gm * ConstMap(db->data(), k, n).transpose();
        if (pg[1])
          MutMap(pg[1]->data(), k, n).noalias() += ConstMap(da->data(), m, k).transpose() * gm;
      });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_ndim(a, 2, "matmul_nt");
  require_ndim(b, 2, "matmul_nt");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<double> out(static_cast<size_t>(m) * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.data(), m, k) * ConstMap(b.data(), n, k).transpose();
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(
      {m, n}, std::move(out), {a, b},
      [da, db, m, k, n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        ConstMap gm(g.data(), m, n);
        if (pg[0])
          MutMap(pg[0]->data(), m, k).noalias() += gm * ConstMap(db->data(), n, k);
        if (pg[1])
          MutMap(pg[1]->data(), n, k).noalias() += gm.transpose() * ConstMap(da->data(), m, k);
      });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require_ndim(a, 3, "bmm");
  require_ndim(b, 3, "bmm");
  const int N = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  if (b.dim(0) != N || b.dim(1) != k)
    throw ShapeError("bmm: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(static_cast<size_t>(N) * m * n);
  for (int i = 0; i < N; ++i)
    MutMap(out.data() + static_cast<size_t>(i) * m * n, m, n).noalias() =
        ConstMap(a.data() + static_cast<size_t>(i) * m * k, m, k) *
        ConstMap(b.data() + static_cast<size_t>(i) * k * n, k, n);
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(
      {N, m, n}, std::move(out), {a, b},
      [da, db, N, m, k, n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        for (int i = 0; i < N; ++i) {
          ConstMap gm(g.data() + static_cast<size_t>(i) * m * n, m, n);
          if (pg[0])
            MutMap(pg[0]->data() + static_cast<size_t>(i) * m * k, m, k).noalias() +=
                gm * ConstMap(db->data() + static_cast<size_t>(i) * k * n, k, n).transpose();
          if (pg[1])
            MutMap(pg[1]->data() + static_cast<size_t>(i) * k * n, k, n).noalias() +=
                ConstMap(da->data() + static_cast<size_t>(i) * m * k, m, k).transpose() * gm;
        }
      });
}

Tensor bmm_nt(const Tensor& a, const Tensor& b) {
  require_ndim(a, 3, "bmm_nt");
  require_ndim(b, 3, "bmm_nt");
  const int N = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
  if (b.dim(0) != N || b.dim(2) != k)
    throw ShapeError("bmm_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<double> out(static_cast<size_t>(N) * m * n);
  for (int i = 0; i < N; ++i)
    MutMap(out.data() + static_cast<size_t>(i) * m * n, m, n).noalias() =
        ConstMap(a.data() + static_cast<size_t>(i) * m * k, m, k) *
        ConstMap(b.data() + static_cast<size_t>(i) * n * k, n, k).transpose();
  DataPtr da = a.impl()->data, db = b.impl()->data;
  return Tensor::from_op(
      {N, m, n}, std::move(out), {a, b},
      [da, db, N, m, k, n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        for (int i = 0; i < N; ++i) {
          ConstMap gm(g.data() + static_cast<size_t>(i) * m * n, m, n);
          if (pg[0])
            MutMap(pg[0]->data() + static_cast<size_t>(i) * m * k, m, k).noalias() +=
                gm * ConstMap(db->data() + static_cast<size_t>(i) * n * k, n, k);
          if (pg[1])
            MutMap(pg[1]->data() + static_cast<size_t>(i) * n * k, n, k).noalias() +=
                gm.transpose() * ConstMap(da->data() + static_cast<size_t>(i) * m * k, m, k);
        }
      });
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim())
    throw IndexError("softmax: axis " + std::to_string(axis) + " for shape " +
                     shape_str(x.shape()));
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(x.dim(i));
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<size_t>(x.dim(i));
  const size_t n = static_cast<size_t>(x.dim(axis));
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> out(x.numel());
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * n * inner + in;
      double mx = ninf;
      for (size_t j = 0; j < n; ++j) mx = std::max(mx, x.data()[base + j * inner]);
      if (mx == ninf) throw NumericError("softmax: all entries -inf along axis");
      double z = 0.0;
      for (size_t j = 0; j < n; ++j) {
        const double v = x.data()[base + j * inner];
        const double e = v == ninf ? 0.0 : std::exp(v - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  DataPtr hold = std::make_shared<std::vector<double>>(out);
  return Tensor::from_op(
      x.shape(), std::move(out), {x},
      [hold, outer, inner, n](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (!pg[0]) return;
        for (size_t o = 0; o < outer; ++o)
          for (size_t in = 0; in < inner; ++in) {
            const size_t base = o * n * inner + in;
            double dot = 0.0;
            for (size_t j = 0; j < n; ++j) dot += g[base + j * inner] * (*hold)[base + j * inner];
            for (size_t j = 0; j < n; ++j) {
              const double y = (*hold)[base + j * inner];
              (*pg[0])[base + j * inner] += y * (g[base + j * inner] - dot);
            }
          }
      });
}

Tensor softmax_lastdim(const Tensor& x) { return softmax(x, x.ndim() - 1); }

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.ndim() < 1) throw ShapeError("layer_norm: scalar input");
  const int D = x.dim(x.ndim() - 1);
  require_ndim(gain, 1, "layer_norm");
  require_ndim(bias, 1, "layer_norm");
  if (gain.dim(0) != D || bias.dim(0) != D)
    throw ShapeError("layer_norm: affine dims " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " vs feature dim " + std::to_string(D));
  const size_t rows = x.numel() / static_cast<size_t>(D);
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (size_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * D;
    double mu = 0.0;
    for (int d = 0; d < D; ++d) mu += row[d];
    mu /= D;
    double var = 0.0;
    for (int d = 0; d < D; ++d) var += (row[d] - mu) * (row[d] - mu);
    var /= D;
    const double iv = 1.0 / std::sqrt(var + eps);
    (*inv)[r] = iv;
    for (int d = 0; d < D; ++d) {
      const double xh = (row[d] - mu) * iv;
      (*xhat)[r * D + d] = xh;
      out[r * D + d] = xh * gain.data()[d] + bias.data()[d];
    }
  }
  DataPtr dg = gain.impl()->data;
  return Tensor::from_op(
      x.shape(), std::move(out), {x, gain, bias},
      [xhat, inv, dg, rows, D](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        for (size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * D;
          const double* xh = xhat->data() + r * D;
          if (pg[0]) {
            double m1 = 0.0, m2 = 0.0;
            for (int d = 0; d < D; ++d) {
              const double dxh = gr[d] * (*dg)[d];
              m1 += dxh;
              m2 += dxh * xh[d];
            }
            m1 /= D;
            m2 /= D;
            for (int d = 0; d < D; ++d) {
              const double dxh = gr[d] * (*dg)[d];
              (*pg[0])[r * D + d] += (*inv)[r] * (dxh - m1 - xh[d] * m2);
            }
          }
          if (pg[1])
            for (int d = 0; d < D; ++d) (*pg[1])[d] += gr[d] * xh[d];
          if (pg[2])
            for (int d = 0; d < D; ++d) (*pg[2])[d] += gr[d];
        }
      });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  require_ndim(logits, 2, "cross_entropy");
  const int N = logits.dim(0), V = logits.dim(1);
  if (static_cast<int>(targets.size()) != N)
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(N) + " rows");
  for (int t : targets) {
    if (t < 0 || t >= V)
      throw IndexError("cross_entropy: target " + std::to_string(t) + " outside [0," +
                       std::to_string(V) + ")");
  }
  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  double loss = 0.0;
  for (int i = 0; i < N; ++i) {
    const double* row = logits.data() + static_cast<size_t>(i) * V;
    double mx = row[0];
    for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (int v = 0; v < V; ++v) z += std::exp(row[v] - mx);
    for (int v = 0; v < V; ++v) (*probs)[static_cast<size_t>(i) * V + v] = std::exp(row[v] - mx) / z;
    loss -= (row[targets[i]] - mx) - std::log(z);
  }
  loss /= N;
  return Tensor::from_op(
      {1}, {loss}, {logits},
      [probs, targets, N, V](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (!pg[0]) return;
        const double s = g[0] / N;
        for (int i = 0; i < N; ++i)
          for (int v = 0; v < V; ++v) {
            double d = (*probs)[static_cast<size_t>(i) * V + v];
            if (v == targets[i]) d -= 1.0;
            (*pg[0])[static_cast<size_t>(i) * V + v] += s * d;
          }
      });
}

Tensor add_attn_mask(const Tensor& scores, const Tensor& mask, int heads) {
  require_ndim(scores, 3, "add_attn_mask");
  require_ndim(mask, 3, "add_attn_mask");
  const int BH = scores.dim(0), Tq = scores.dim(1), Tk = scores.dim(2);
  if (heads <= 0 || BH % heads != 0)
    throw ShapeError("add_attn_mask: " + std::to_string(BH) + " score slabs not divisible by " +
                     std::to_string(heads) + " heads");
  const int B = BH / heads, Bm = mask.dim(0);
  if ((Bm != 1 && Bm != B) || mask.dim(1) != Tq || mask.dim(2) != Tk)
    throw ShapeError("add_attn_mask: mask " + shape_str(mask.shape()) + " vs scores " +
                     shape_str(scores.shape()));
  std::vector<double> out(scores.numel());
  const size_t slab = static_cast<size_t>(Tq) * Tk;
  for (int b = 0; b < B; ++b)
    for (int h = 0; h < heads; ++h) {
      const size_t so = (static_cast<size_t>(b) * heads + h) * slab;
      const size_t mo = static_cast<size_t>(Bm == 1 ? 0 : b) * slab;
      for (size_t i = 0; i < slab; ++i) out[so + i] = scores.data()[so + i] + mask.data()[mo + i];
    }
  return Tensor::from_op(scores.shape(), std::move(out), {scores, mask},
                         [](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
                           if (pg[0])
                             for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                           // mask is a constant; no flow back even if marked otherwise
                         });
}

Tensor rotary(const Tensor& x, const Tensor& cos_t, const Tensor& sin_t) {
  require_ndim(x, 3, "rotary");
  require_ndim(cos_t, 2, "rotary");
  require_ndim(sin_t, 2, "rotary");
  const int N = x.dim(0), T = x.dim(1), Dh = x.dim(2);
  if (Dh % 2 != 0) throw ShapeError("rotary: head dim " + std::to_string(Dh) + " must be even");
  const int P = Dh / 2;
  if (cos_t.dim(0) < T || cos_t.dim(1) != P || sin_t.dim(0) < T || sin_t.dim(1) != P)
    throw ShapeError("rotary: tables " + shape_str(cos_t.shape()) + "/" +
                     shape_str(sin_t.shape()) + " vs input " + shape_str(x.shape()));
  const int TP = cos_t.dim(1);
  std::vector<double> out(x.numel());
  for (int i = 0; i < N; ++i)
    for (int t = 0; t < T; ++t)
      for (int p = 0; p < P; ++p) {
        const size_t k = (static_cast<size_t>(i) * T + t) * Dh + 2 * p;
        const double c = cos_t.data()[static_cast<size_t>(t) * TP + p];
        const double s = sin_t.data()[static_cast<size_t>(t) * TP + p];
        const double e = x.data()[k], o = x.data()[k + 1];
        out[k] = e * c - o * s;
        out[k + 1] = e * s + o * c;
      }
  DataPtr dc = cos_t.impl()->data, ds = sin_t.impl()->data;
  return Tensor::from_op(
      x.shape(), std::move(out), {x, cos_t, sin_t},
      [dc, ds, N, T, Dh, P, TP](const GradBuffer& g, const std::vector<GradBuffer*>& pg) {
        if (!pg[0]) return;
        for (int i = 0; i < N; ++i)
          for (int t = 0; t < T; ++t)
            for (int p = 0; p < P; ++p) {
              const size_t k = (static_cast<size_t>(i) * T + t) * Dh + 2 * p;
              const double c = (*dc)[static_cast<size_t>(t) * TP + p];
              const double s = (*ds)[static_cast<size_t>(t) * TP + p];
              (*pg[0])[k] += g[k] * c + g[k + 1] * s;
              (*pg[0])[k + 1] += -g[k] * s + g[k + 1] * c;
            }
      });
}

std::pair<Tensor, Tensor> rotary_tables(int max_len, int head_dim, double theta) {
  if (max_len <= 0 || head_dim <= 0 || head_dim % 2 != 0)
    throw ConfigError("rotary_tables: bad max_len/head_dim");
  const int P = head_dim / 2;
  std::vector<double> c(static_cast<size_t>(max_len) * P), s(static_cast<size_t>(max_len) * P);
  for (int t = 0; t < max_len; ++t)
    for (int p = 0; p < P; ++p) {
      const double freq = std::pow(theta, -2.0 * p / head_dim);
      c[static_cast<size_t>(t) * P + p] = std::cos(t * freq);
      s[static_cast<size_t>(t) * P + p] = std::sin(t * freq);
    }
  return {Tensor::from_vector({max_len, P}, std::move(c)),
          Tensor::from_vector({max_len, P}, std::move(s))};
}

}  // namespace sutra
