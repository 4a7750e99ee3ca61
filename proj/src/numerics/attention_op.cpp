#include <cmath>
#include <limits>
#include <memory>

#include "bbp/errors.hpp"
#include "bbp/numerics/ops.hpp"
#include "op_support.hpp"

namespace bbp {

namespace {

void validate_blocks(std::span<const AttentionBlock> blocks, std::size_t lq, std::size_t lk) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (blk.mask.rows != blk.queries.size() || blk.mask.cols != blk.keys.size()) {
      throw ShapeMismatch("attention block " + std::to_string(b) + ": mask " + std::to_string(blk.mask.rows) + "x" +
                          std::to_string(blk.mask.cols) + " for " + std::to_string(blk.queries.size()) +
                          " queries and " + std::to_string(blk.keys.size()) + " keys");
    }
    for (std::size_t q : blk.queries)
      if (q >= lq) throw OutOfRange("attention query column " + std::to_string(q));
    for (std::size_t k : blk.keys)
      if (k >= lk) throw OutOfRange("attention key column " + std::to_string(k));
    for (std::size_t a = 0; a < blk.queries.size(); ++a) {
      bool any = false;
      for (std::size_t c = 0; c < blk.keys.size() && !any; ++c) any = blk.mask(a, c);
      if (!any) throw AllMaskedRow("attention block " + std::to_string(b) + " query " + std::to_string(a));
    }
  }
}

}  // namespace

template <typename T>
DiffArray<T> masked_attention(const DiffArray<T>& q, const DiffArray<T>& k, const DiffArray<T>& v,
                              std::span<const AttentionBlock> blocks, const AttentionOptions& options, Rng* rng) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) throw ShapeMismatch("attention operands must be 2-D");
  const std::size_t d = q.rows(), lq = q.cols(), lk = k.cols();
  if (k.rows() != d || v.rows() != d || v.cols() != lk) {
    throw ShapeMismatch("attention Q " + shape_str(q.shape()) + " K " + shape_str(k.shape()) + " V " +
                        shape_str(v.shape()));
  }
  const std::size_t heads = options.heads;
  if (heads == 0 || d % heads != 0) throw ShapeMismatch("model width " + std::to_string(d) + " not divisible by heads");
  const bool drop = options.train && options.dropout > 0.0;
  if (drop && rng == nullptr) throw InvalidArgument("attention dropout needs an RNG");
  validate_blocks(blocks, lq, lk);

  const std::size_t dk = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));

  // Token-major copies so that each head slice is contiguous.
  auto qt = std::make_shared<RowMat<T>>(cmap(q).transpose());
  auto kt = std::make_shared<RowMat<T>>(cmap(k).transpose());
  auto vt = std::make_shared<RowMat<T>>(cmap(v).transpose());

  // Per block: probabilities [H × nq × nk] and the applied dropout multipliers.
  auto probs = std::make_shared<std::vector<std::vector<T>>>(blocks.size());
  auto keep = std::make_shared<std::vector<std::vector<T>>>(blocks.size());
  RowMat<T> ot = RowMat<T>::Zero(lq, d);
  std::bernoulli_distribution coin(drop ? 1.0 - options.dropout : 1.0);
  const T inv_keep = drop ? T(1.0 / (1.0 - options.dropout)) : T(1);

  std::vector<T> scores;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    const std::size_t nq = blk.queries.size(), nk = blk.keys.size();
    auto& p = (*probs)[b];
    p.assign(heads * nq * nk, T(0));
    if (drop) (*keep)[b].assign(heads * nq * nk, T(0));
    scores.assign(nk, T(0));
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dk;
      for (std::size_t a = 0; a < nq; ++a) {
        const T* qrow = qt->data() + blk.queries[a] * d + c0;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t c = 0; c < nk; ++c) {
          if (!blk.mask(a, c)) continue;
          const T* krow = kt->data() + blk.keys[c] * d + c0;
          T s = T(0);
          for (std::size_t e = 0; e < dk; ++e) s += qrow[e] * krow[e];
          scores[c] = s * scale;
          mx = std::max(mx, scores[c]);
        }
        T total = T(0);
        T* prow = p.data() + (h * nq + a) * nk;
        for (std::size_t c = 0; c < nk; ++c) {
          if (!blk.mask(a, c)) continue;
          prow[c] = std::exp(scores[c] - mx);
          total += prow[c];
        }
        T* orow = ot.data() + blk.queries[a] * d + c0;
        for (std::size_t c = 0; c < nk; ++c) {
          if (!blk.mask(a, c)) continue;
          prow[c] /= total;
          T w = prow[c];
          if (drop) {
            const T m = coin(*rng) ? inv_keep : T(0);
            (*keep)[b][(h * nq + a) * nk + c] = m;
            w *= m;
          }
          if (w == T(0)) continue;
          const T* vrow = vt->data() + blk.keys[c] * d + c0;
          for (std::size_t e = 0; e < dk; ++e) orow[e] += w * vrow[e];
        }
      }
    }
  }

  std::vector<T> out(d * lq);
  MatMap<T>(out.data(), d, lq) = ot.transpose();
  std::vector<AttentionBlock> kept(blocks.begin(), blocks.end());
  return detail::finish<T>(
      common_tape<T>({&q, &k, &v}), Shape{d, lq}, std::move(out),
      [q, k, v, qt, kt, vt, probs, keep, kept, heads, dk, d, lq, lk, scale, drop](std::span<const T> g) {
        const RowMat<T> dot = CMatMap<T>(g.data(), d, lq).transpose();
        RowMat<T> dqt = RowMat<T>::Zero(lq, d);
        RowMat<T> dkt = RowMat<T>::Zero(lk, d);
        RowMat<T> dvt = RowMat<T>::Zero(lk, d);
        std::vector<T> dp;
        for (std::size_t b = 0; b < kept.size(); ++b) {
          const auto& blk = kept[b];
          const std::size_t nq = blk.queries.size(), nk = blk.keys.size();
          const auto& p = (*probs)[b];
          dp.assign(nk, T(0));
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dk;
            for (std::size_t a = 0; a < nq; ++a) {
              const std::size_t qa = blk.queries[a];
              const T* prow = p.data() + (h * nq + a) * nk;
              const T* mrow = drop ? (*keep)[b].data() + (h * nq + a) * nk : nullptr;
              const T* grow = dot.data() + qa * d + c0;
              T weighted = T(0);
              for (std::size_t c = 0; c < nk; ++c) {
                dp[c] = T(0);
                if (!blk.mask(a, c)) continue;
                const std::size_t kc = blk.keys[c];
                const T* vrow = vt->data() + kc * d + c0;
                T* dvrow = dvt.data() + kc * d + c0;
                const T m = mrow ? mrow[c] : T(1);
                const T w = prow[c] * m;
                T s = T(0);
                for (std::size_t e = 0; e < dk; ++e) {
                  s += grow[e] * vrow[e];
                  dvrow[e] += w * grow[e];
                }
                dp[c] = s * m;
                weighted += prow[c] * dp[c];
              }
              const T* qrow = qt->data() + qa * d + c0;
              T* dqrow = dqt.data() + qa * d + c0;
              for (std::size_t c = 0; c < nk; ++c) {
                if (!blk.mask(a, c)) continue;
                const T ds = prow[c] * (dp[c] - weighted) * scale;
                if (ds == T(0)) continue;
                const std::size_t kc = blk.keys[c];
                const T* krow = kt->data() + kc * d + c0;
                T* dkrow = dkt.data() + kc * d + c0;
                for (std::size_t e = 0; e < dk; ++e) {
                  dqrow[e] += ds * krow[e];
                  dkrow[e] += ds * qrow[e];
                }
              }
            }
          }
        }
        if (q.tracked()) gmap(q) += dqt.transpose();
        if (k.tracked()) gmap(k) += dkt.transpose();
        if (v.tracked()) gmap(v) += dvt.transpose();
      });
}

template DiffArray<float> masked_attention(const DiffArray<float>&, const DiffArray<float>&, const DiffArray<float>&,
                                           std::span<const AttentionBlock>, const AttentionOptions&, Rng*);
template DiffArray<double> masked_attention(const DiffArray<double>&, const DiffArray<double>&,
                                            const DiffArray<double>&, std::span<const AttentionBlock>,
                                            const AttentionOptions&, Rng*);

}  // namespace bbp
