#include "bbp/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "bbp/errors.hpp"
#include "op_support.hpp"

namespace bbp {

template <typename T>
DiffArray<T> matmul(const DiffArray<T>& a, const DiffArray<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2) throw ShapeMismatch("matmul needs 2-D operands");
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matmul " + shape_str(a.shape()) + " · " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n);
  MatMap<T>(out.data(), m, n).noalias() = cmap(a) * cmap(b);
  return detail::finish<T>(common_tape<T>({&a, &b}), Shape{m, n}, std::move(out),
                           [a, b, m, k, n](std::span<const T> g) {
                             CMatMap<T> dc(g.data(), m, n);
                             if (a.tracked()) gmap(a).noalias() += dc * cmap(b).transpose();
                             if (b.tracked()) gmap(b).noalias() += cmap(a).transpose() * dc;
                           });
}

template <typename T>
DiffArray<T> transpose(const DiffArray<T>& a) {
  if (a.ndim() != 2) throw ShapeMismatch("transpose needs a 2-D operand");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(r * c);
  MatMap<T>(out.data(), c, r) = cmap(a).transpose();
  return detail::finish<T>(common_tape<T>({&a}), Shape{c, r}, std::move(out), [a, r, c](std::span<const T> g) {
    if (a.tracked()) gmap(a) += CMatMap<T>(g.data(), c, r).transpose();
  });
}

namespace {

template <typename T>
void require_same_shape(const DiffArray<T>& a, const DiffArray<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + " " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void accumulate(const DiffArray<T>& x, std::span<const T> g, T factor) {
  if (!x.tracked()) return;
  auto& dst = x.grad_buffer_();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

template <typename T>
DiffArray<T> add(const DiffArray<T>& a, const DiffArray<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return detail::finish<T>(common_tape<T>({&a, &b}), a.shape(), std::move(out), [a, b](std::span<const T> g) {
    accumulate(a, g, T(1));
    accumulate(b, g, T(1));
  });
}

template <typename T>
DiffArray<T> sub(const DiffArray<T>& a, const DiffArray<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return detail::finish<T>(common_tape<T>({&a, &b}), a.shape(), std::move(out), [a, b](std::span<const T> g) {
    accumulate(a, g, T(1));
    accumulate(b, g, T(-1));
  });
}

template <typename T>
DiffArray<T> mul(const DiffArray<T>& a, const DiffArray<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::finish<T>(common_tape<T>({&a, &b}), a.shape(), std::move(out), [a, b](std::span<const T> g) {
    if (a.tracked()) {
      auto& da = a.grad_buffer_();
      auto y = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
    }
    if (b.tracked()) {
      auto& db = b.grad_buffer_();
      auto x = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
    }
  });
}

template <typename T>
DiffArray<T> scale(const DiffArray<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (T& v : out) v *= factor;
  return detail::finish<T>(common_tape<T>({&a}), a.shape(), std::move(out),
                           [a, factor](std::span<const T> g) { accumulate(a, g, factor); });
}

template <typename T>
DiffArray<T> relu(const DiffArray<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  return detail::finish<T>(common_tape<T>({&a}), a.shape(), std::move(out), [a](std::span<const T> g) {
    if (!a.tracked()) return;
    auto& da = a.grad_buffer_();
    auto x = a.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > T(0)) da[i] += g[i];
    }
  });
}

template <typename T>
DiffArray<T> sum(const DiffArray<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  return detail::finish<T>(common_tape<T>({&a}), Shape{1}, std::vector<T>{total}, [a](std::span<const T> g) {
    if (!a.tracked()) return;
    auto& da = a.grad_buffer_();
    for (T& v : da) v += g[0];
  });
}

template <typename T>
DiffArray<T> softmax_rows(const DiffArray<T>& m, const Mask* mask) {
  if (m.ndim() != 2) throw ShapeMismatch("softmax_rows needs a 2-D operand");
  const std::size_t r = m.rows(), c = m.cols();
  if (mask != nullptr && (mask->rows != r || mask->cols != c)) {
    throw ShapeMismatch("mask " + std::to_string(mask->rows) + "x" + std::to_string(mask->cols) +
                        " for matrix " + shape_str(m.shape()));
  }
  auto x = m.data();
  std::vector<T> out(r * c, T(0));
  for (std::size_t i = 0; i < r; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      mx = std::max(mx, x[i * c + j]);
      any = true;
    }
    if (!any) throw AllMaskedRow("row " + std::to_string(i) + " has no allowed entry");
    T total = T(0);
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && !(*mask)(i, j)) continue;
      const T e = std::exp(x[i * c + j] - mx);
      out[i * c + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= total;
  }
  Tape<T>* tape = common_tape<T>({&m});
  if (tape == nullptr) return DiffArray<T>(m.shape(), std::move(out));
  DiffArray<T> y = tape->make_output(m.shape(), std::move(out));
  tape->record([m, y, r, c]() {
    if (!y.has_grad() || !m.tracked()) return;
    auto g = y.grad();
    auto p = y.data();
    auto& dm = m.grad_buffer_();
    for (std::size_t i = 0; i < r; ++i) {
      T dot = T(0);
      for (std::size_t j = 0; j < c; ++j) dot += p[i * c + j] * g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) dm[i * c + j] += p[i * c + j] * (g[i * c + j] - dot);
    }
  });
  return y;
}

template <typename T>
DiffArray<T> conv1d(const DiffArray<T>& x, const DiffArray<T>& kernel, std::size_t dilation,
                    bool causal_left_pad) {
  if (x.ndim() != 2) throw ShapeMismatch("conv1d input must be [C_in×L]");
  if (kernel.ndim() != 3) throw ShapeMismatch("conv1d kernel must be [C_out×C_in×K]");
  if (dilation < 1) throw InvalidArgument("conv1d dilation must be >= 1");
  const std::size_t cin = x.rows(), len = x.cols();
  const std::size_t cout = kernel.dim(0), kw = kernel.dim(2);
  if (kernel.dim(1) != cin) {
    throw ShapeMismatch("conv1d kernel " + shape_str(kernel.shape()) + " on input " + shape_str(x.shape()));
  }
  const std::ptrdiff_t span = static_cast<std::ptrdiff_t>((kw - 1) * dilation);
  const std::ptrdiff_t pad = causal_left_pad ? span : 0;
  const std::ptrdiff_t out_len = static_cast<std::ptrdiff_t>(len) + pad - span;
  if (out_len < 1) throw ShapeMismatch("conv1d input shorter than the dilated kernel");

  // Tap j as a dense [C_out×C_in] matrix.
  auto taps = std::make_shared<std::vector<std::vector<T>>>(kw, std::vector<T>(cout * cin));
  auto kd = kernel.data();
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t j = 0; j < kw; ++j) (*taps)[j][o * cin + i] = kd[(o * cin + i) * kw + j];

  struct Range {
    std::ptrdiff_t out_begin, in_begin, count;
  };
  std::vector<Range> ranges(kw);
  for (std::size_t j = 0; j < kw; ++j) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * dilation) - pad;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(out_len, static_cast<std::ptrdiff_t>(len) - off);
    ranges[j] = {lo, lo + off, std::max<std::ptrdiff_t>(0, hi - lo)};
  }

  std::vector<T> out(cout * static_cast<std::size_t>(out_len), T(0));
  MatMap<T> y(out.data(), cout, out_len);
  auto xm = cmap(x);
  for (std::size_t j = 0; j < kw; ++j) {
    const auto& rg = ranges[j];
    if (rg.count == 0) continue;
    y.middleCols(rg.out_begin, rg.count).noalias() +=
        CMatMap<T>((*taps)[j].data(), cout, cin) * xm.middleCols(rg.in_begin, rg.count);
  }
  return detail::finish<T>(
      common_tape<T>({&x, &kernel}), Shape{cout, static_cast<std::size_t>(out_len)}, std::move(out),
      [x, kernel, taps, ranges, cout, cin, kw, out_len](std::span<const T> g) {
        CMatMap<T> dy(g.data(), cout, out_len);
        auto xm = cmap(x);
        if (kernel.tracked()) {
          auto& dk = kernel.grad_buffer_();
          std::vector<T> dtap(cout * cin);
          for (std::size_t j = 0; j < kw; ++j) {
            const auto& rg = ranges[j];
            if (rg.count == 0) continue;
            MatMap<T>(dtap.data(), cout, cin).noalias() =
                dy.middleCols(rg.out_begin, rg.count) * xm.middleCols(rg.in_begin, rg.count).transpose();
            for (std::size_t o = 0; o < cout; ++o)
              for (std::size_t i = 0; i < cin; ++i) dk[(o * cin + i) * kw + j] += dtap[o * cin + i];
          }
        }
        if (x.tracked()) {
          auto dx = gmap(x);
          for (std::size_t j = 0; j < kw; ++j) {
            const auto& rg = ranges[j];
            if (rg.count == 0) continue;
            dx.middleCols(rg.in_begin, rg.count).noalias() +=
                CMatMap<T>((*taps)[j].data(), cout, cin).transpose() * dy.middleCols(rg.out_begin, rg.count);
          }
        }
      });
}

template <typename T>
DiffArray<T> cross_entropy(const DiffArray<T>& logits, std::span<const int> targets, std::span<const int> ignore) {
  if (logits.ndim() != 2) throw ShapeMismatch("cross_entropy logits must be [L×V]");
  const std::size_t len = logits.rows(), vocab = logits.cols();
  if (targets.size() != len) {
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(len) + " rows");
  }
  auto is_ignored = [&](int t) { return std::find(ignore.begin(), ignore.end(), t) != ignore.end(); };
  auto x = logits.data();
  auto probs = std::make_shared<std::vector<T>>(len * vocab, T(0));
  auto used = std::make_shared<std::vector<std::uint8_t>>(len, 0);
  std::size_t count = 0;
  T total = T(0);
  for (std::size_t t = 0; t < len; ++t) {
    const int target = targets[t];
    if (is_ignored(target)) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= vocab) {
      throw OutOfRange("target " + std::to_string(target) + " outside vocabulary of " + std::to_string(vocab));
    }
    const T* row = x.data() + t * vocab;
    const T mx = *std::max_element(row, row + vocab);
    T z = T(0);
    for (std::size_t v = 0; v < vocab; ++v) {
      const T e = std::exp(row[v] - mx);
      (*probs)[t * vocab + v] = e;
      z += e;
    }
    for (std::size_t v = 0; v < vocab; ++v) (*probs)[t * vocab + v] /= z;
    total += mx + std::log(z) - row[target];
    (*used)[t] = 1;
    ++count;
  }
  if (count == 0) throw EmptyBatch("every target position is ignored");
  const T inv = T(1) / static_cast<T>(count);
  std::vector<int> tg(targets.begin(), targets.end());
  return detail::finish<T>(common_tape<T>({&logits}), Shape{1}, std::vector<T>{total * inv},
                           [logits, probs, used, tg, len, vocab, inv](std::span<const T> g) {
                             if (!logits.tracked()) return;
                             auto& dl = logits.grad_buffer_();
                             const T s = g[0] * inv;
                             for (std::size_t t = 0; t < len; ++t) {
                               if (!(*used)[t]) continue;
                               for (std::size_t v = 0; v < vocab; ++v) dl[t * vocab + v] += s * (*probs)[t * vocab + v];
                               dl[t * vocab + static_cast<std::size_t>(tg[t])] -= s;
                             }
                           });
}

template <typename T>
DiffArray<T> gather_columns(const DiffArray<T>& w, std::span<const int> index) {
  if (w.ndim() != 2) throw ShapeMismatch("gather_columns needs a 2-D table");
  if (index.empty()) throw ShapeMismatch("gather_columns with no indices");
  const std::size_t d = w.rows(), v = w.cols(), n = index.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (index[j] < 0 || static_cast<std::size_t>(index[j]) >= v) {
      throw OutOfRange("column index " + std::to_string(index[j]) + " outside [0," + std::to_string(v) + ")");
    }
    idx[j] = static_cast<std::size_t>(index[j]);
  }
  auto src = w.data();
  std::vector<T> out(d * n);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = src[r * v + idx[j]];
  return detail::finish<T>(common_tape<T>({&w}), Shape{d, n}, std::move(out), [w, idx, d, v, n](std::span<const T> g) {
    if (!w.tracked()) return;
    auto& dw = w.grad_buffer_();
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t j = 0; j < n; ++j) dw[r * v + idx[j]] += g[r * n + j];
  });
}

template <typename T>
DiffArray<T> slice_columns(const DiffArray<T>& x, std::size_t begin, std::size_t end) {
  if (x.ndim() != 2 || begin >= end || end > x.cols()) {
    throw ShapeMismatch("slice_columns [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                        shape_str(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), n = end - begin;
  std::vector<T> out(r * n);
  MatMap<T>(out.data(), r, n) = cmap(x).middleCols(begin, n);
  return detail::finish<T>(common_tape<T>({&x}), Shape{r, n}, std::move(out), [x, r, c, n, begin](std::span<const T> g) {
    if (x.tracked()) gmap(x).middleCols(begin, n) += CMatMap<T>(g.data(), r, n);
    (void)c;
  });
}

template <typename T>
DiffArray<T> slice_rows(const DiffArray<T>& x, std::size_t begin, std::size_t end) {
  if (x.ndim() != 2 || begin >= end || end > x.rows()) {
    throw ShapeMismatch("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                        shape_str(x.shape()));
  }
  const std::size_t c = x.cols(), n = end - begin;
  auto src = x.data();
  std::vector<T> out(src.begin() + begin * c, src.begin() + end * c);
  return detail::finish<T>(common_tape<T>({&x}), Shape{n, c}, std::move(out), [x, c, begin](std::span<const T> g) {
    if (!x.tracked()) return;
    auto& dx = x.grad_buffer_();
    for (std::size_t i = 0; i < g.size(); ++i) dx[begin * c + i] += g[i];
  });
}

template <typename T>
DiffArray<T> concat_columns(std::span<const DiffArray<T>> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_columns of nothing");
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.rows() != r) throw ShapeMismatch("concat_columns row count mismatch");
    total += p.cols();
    Tape<T>* t = common_tape<T>({&p});
    if (t != nullptr) {
      if (tape != nullptr && t != tape) throw InvalidArgument("inputs recorded on different tapes");
      tape = t;
    }
  }
  std::vector<T> out(r * total);
  MatMap<T> y(out.data(), r, total);
  std::size_t at = 0;
  for (const auto& p : parts) {
    y.middleCols(at, p.cols()) = cmap(p);
    at += p.cols();
  }
  std::vector<DiffArray<T>> kept(parts.begin(), parts.end());
  return detail::finish<T>(tape, Shape{r, total}, std::move(out), [kept, r, total](std::span<const T> g) {
    CMatMap<T> dy(g.data(), r, total);
    std::size_t at = 0;
    for (const auto& p : kept) {
      if (p.tracked()) gmap(p) += dy.middleCols(at, p.cols());
      at += p.cols();
    }
  });
}

template <typename T>
DiffArray<T> concat_rows(std::span<const DiffArray<T>> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows of nothing");
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.cols() != c) throw ShapeMismatch("concat_rows column count mismatch");
    total += p.rows();
    Tape<T>* t = common_tape<T>({&p});
    if (t != nullptr) {
      if (tape != nullptr && t != tape) throw InvalidArgument("inputs recorded on different tapes");
      tape = t;
    }
  }
  std::vector<T> out;
  out.reserve(total * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<DiffArray<T>> kept(parts.begin(), parts.end());
  return detail::finish<T>(tape, Shape{total, c}, std::move(out), [kept](std::span<const T> g) {
    std::size_t at = 0;
    for (const auto& p : kept) {
      if (p.tracked()) {
        auto& dp = p.grad_buffer_();
        for (std::size_t i = 0; i < p.size(); ++i) dp[i] += g[at + i];
      }
      at += p.size();
    }
  });
}

template <typename T>
DiffArray<T> column_block_mean(const DiffArray<T>& x, std::size_t width) {
  if (x.ndim() != 2 || width == 0 || x.cols() % width != 0) {
    throw ShapeMismatch("column_block_mean width " + std::to_string(width) + " on " + shape_str(x.shape()));
  }
  const std::size_t r = x.rows(), c = x.cols(), n = c / width;
  const T inv = T(1) / static_cast<T>(width);
  auto src = x.data();
  std::vector<T> out(r * n, T(0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < n; ++b) {
      T s = T(0);
      for (std::size_t j = 0; j < width; ++j) s += src[i * c + b * width + j];
      out[i * n + b] = s * inv;
    }
  return detail::finish<T>(common_tape<T>({&x}), Shape{r, n}, std::move(out),
                           [x, r, c, n, width, inv](std::span<const T> g) {
                             if (!x.tracked()) return;
                             auto& dx = x.grad_buffer_();
                             for (std::size_t i = 0; i < r; ++i)
                               for (std::size_t b = 0; b < n; ++b)
                                 for (std::size_t j = 0; j < width; ++j) dx[i * c + b * width + j] += g[i * n + b] * inv;
                           });
}

template <typename T>
DiffArray<T> dropout(const DiffArray<T>& x, double rate, Rng& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidArgument("dropout rate must be in [0,1)");
  if (!train || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const T s = T(1.0 / (1.0 - rate));
  std::vector<T> m(x.size());
  for (T& v : m) v = keep(rng) ? s : T(0);
  return mul(x, DiffArray<T>(x.shape(), std::move(m)));
}

#define BBP_INSTANTIATE_OPS(T)                                                                              \
  template DiffArray<T> matmul(const DiffArray<T>&, const DiffArray<T>&);                                   \
  template DiffArray<T> transpose(const DiffArray<T>&);                                                     \
  template DiffArray<T> add(const DiffArray<T>&, const DiffArray<T>&);                                      \
  template DiffArray<T> sub(const DiffArray<T>&, const DiffArray<T>&);                                      \
  template DiffArray<T> mul(const DiffArray<T>&, const DiffArray<T>&);                                      \
  template DiffArray<T> scale(const DiffArray<T>&, T);                                                      \
  template DiffArray<T> relu(const DiffArray<T>&);                                                          \
  template DiffArray<T> sum(const DiffArray<T>&);                                                           \
  template DiffArray<T> softmax_rows(const DiffArray<T>&, const Mask*);                                     \
  template DiffArray<T> conv1d(const DiffArray<T>&, const DiffArray<T>&, std::size_t, bool);                \
  template DiffArray<T> cross_entropy(const DiffArray<T>&, std::span<const int>, std::span<const int>);     \
  template DiffArray<T> gather_columns(const DiffArray<T>&, std::span<const int>);                          \
  template DiffArray<T> slice_columns(const DiffArray<T>&, std::size_t, std::size_t);                       \
  template DiffArray<T> slice_rows(const DiffArray<T>&, std::size_t, std::size_t);                          \
  template DiffArray<T> concat_columns(std::span<const DiffArray<T>>);                                      \
  template DiffArray<T> concat_rows(std::span<const DiffArray<T>>);                                         \
  template DiffArray<T> column_block_mean(const DiffArray<T>&, std::size_t);                                \
  template DiffArray<T> dropout(const DiffArray<T>&, double, Rng&, bool);

BBP_INSTANTIATE_OPS(float)
BBP_INSTANTIATE_OPS(double)

}  // namespace bbp
