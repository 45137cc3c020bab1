#include "deephash/hashloss.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "deephash/errors.hpp"

namespace deephash {

namespace {

constexpr double kSigmoidClamp = 500.0;

void require_same_bits(const BitCode& a, const BitCode& b) {
  if (a.size() != b.size()) {
    throw DimensionError("codes differ in length: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  if (a.size() == 0) throw DimensionError("empty hash codes");
}

void require_head(const Tensor& w, std::size_t bits, std::size_t dim) {
  if (w.rank() != 2 || w.dim(0) != bits || w.dim(1) != dim) {
    throw DimensionError("hash head shape " + shape_string(w.shape()) + " does not match " +
                         std::to_string(bits) + " bits over " + std::to_string(dim) +
                         "-d features");
  }
}

// Leave-one-out weight exp(-y * partial product) for bit k.
double leave_one_out_weight(const BitCode& bi, const BitCode& bj, int y, std::size_t k) {
  return std::exp(-y * partial_code_product(bi, bj, k));
}

}  // namespace

double code_product(const BitCode& a, const BitCode& b) {
  require_same_bits(a, b);
  std::size_t disagree = 0;
  auto wa = a.words();
  auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i)
    disagree += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
  const double k = static_cast<double>(a.size());
  return (k - 2.0 * static_cast<double>(disagree)) / k;
}

double partial_code_product(const BitCode& a, const BitCode& b, std::size_t k) {
  require_same_bits(a, b);
  if (k >= a.size()) {
    throw BoundsError("bit index " + std::to_string(k) + " out of range for " +
                      std::to_string(a.size()) + "-bit code");
  }
  return code_product(a, b) - a.bit(k) * b.bit(k) / static_cast<double>(a.size());
}

double atomic_loss(const BitCode& a, const BitCode& b, int y) {
  return std::exp(-y * code_product(a, b));
}

PairConstants pair_constants(int y, std::size_t bits) {
  if (bits == 0) throw ConfigError("pair constants need at least one bit");
  const double t = static_cast<double>(y) / static_cast<double>(bits);
  const double minus = std::exp(-t);
  const double plus = std::exp(t);
  return {0.5 * (minus + plus), 0.5 * (minus - plus)};
}

double sigmoid(double t) {
  t = std::clamp(t, -kSigmoidClamp, kSigmoidClamp);
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double smoothed_bit_product(std::span<const double> w, std::span<const double> zi,
                            std::span<const double> zj) {
  return 2.0 * sigmoid(dot(w, zi) * dot(w, zj)) - 1.0;
}

double bitwise_loss(std::span<const double> zi, std::span<const double> zj, const BitCode& bi,
                    const BitCode& bj, int y, const Tensor& w, std::size_t k) {
  require_same_bits(bi, bj);
  require_head(w, bi.size(), zi.size());
  if (zj.size() != zi.size()) throw DimensionError("feature vectors differ in length");
  const auto [c, c_prime] = pair_constants(y, bi.size());
  return leave_one_out_weight(bi, bj, y, k) * (c + c_prime * smoothed_bit_product(w.slice(k), zi, zj));
}

double approx_pair_loss(std::span<const double> zi, std::span<const double> zj,
                        const BitCode& bi, const BitCode& bj, int y, const Tensor& w) {
  double total = 0.0;
  for (std::size_t k = 0; k < bi.size(); ++k) total += bitwise_loss(zi, zj, bi, bj, y, w, k);
  return total / static_cast<double>(bi.size());
}

PairGradients pair_gradients(std::span<const double> zi, std::span<const double> zj,
                             const BitCode& bi, const BitCode& bj, int y, const Tensor& w) {
  require_same_bits(bi, bj);
  const std::size_t bits = bi.size();
  const std::size_t dim = zi.size();
  require_head(w, bits, dim);
  if (zj.size() != dim) throw DimensionError("feature vectors differ in length");

  PairGradients g{Tensor({bits, dim}), Tensor({dim}), Tensor({dim})};
  if (y == 0) return g;

  const auto [c, c_prime] = pair_constants(y, bits);
  (void)c;
  const double inv_bits = 1.0 / static_cast<double>(bits);
  for (std::size_t k = 0; k < bits; ++k) {
    auto wk = w.slice(k);
    const double pi = dot(wk, zi);
    const double pj = dot(wk, zj);
    const double s = sigmoid(pi * pj);
    // d/du of (1/K) * weight * (c + c' (2 sigma(u) - 1)).
    const double g_u = 2.0 * inv_bits * leave_one_out_weight(bi, bj, y, k) * c_prime * s * (1.0 - s);
    auto gw = g.grad_w.slice(k);
    for (std::size_t d = 0; d < dim; ++d) {
      gw[d] += g_u * (zi[d] * pj + zj[d] * pi);
      g.grad_zi[d] += g_u * wk[d] * pj;
      g.grad_zj[d] += g_u * wk[d] * pi;
    }
  }
  return g;
}

std::vector<BitCode> compute_codes(const Tensor& z, const Tensor& w) {
  const Tensor projections = matmul_nt(z, w);
  std::vector<BitCode> codes;
  codes.reserve(z.dim(0));
  for (std::size_t i = 0; i < z.dim(0); ++i)
    codes.push_back(BitCode::from_projections(projections.slice(i)));
  return codes;
}

BatchLoss accumulate_batch(std::span<const SupervisedPair> pairs, const Tensor& z,
                           std::span<const BitCode> codes, const Tensor& w) {
  if (z.rank() != 2) throw DimensionError("features must be [n x dim]");
  const std::size_t n = z.dim(0);
  const std::size_t dim = z.dim(1);
  if (codes.size() != n) throw DimensionError("one code per feature row is required");
  if (w.rank() != 2 || w.dim(1) != dim) {
    throw DimensionError("hash head shape " + shape_string(w.shape()) + " does not match " +
                         std::to_string(dim) + "-d features");
  }
  const std::size_t bits = w.dim(0);

  BatchLoss out;
  out.grads.grad_w = Tensor({bits, dim});
  out.grads.grad_z = Tensor({n, dim});
  if (pairs.empty()) return out;

  // Projections p[i][k] = w_k . z_i. The per-pair gradients factor through
  // them: grad_w[k] = sum_i coef[i][k] z_i and grad_z[i] = sum_k coef[i][k] w_k.
  const Tensor proj = matmul_nt(z, w);
  Tensor coef({n, bits});
  const double inv_bits = 1.0 / static_cast<double>(bits);

  for (const auto& pair : pairs) {
    const std::size_t i = pair.first;
    const std::size_t j = pair.second;
    if (i >= n || j >= n) throw BoundsError("pair position out of range");
    const BitCode& bi = codes[i];
    const BitCode& bj = codes[j];
    if (bi.size() != bits || bj.size() != bits) throw DimensionError("code length != bits");
    if (pair.y == 0) {
      out.q += 1.0;
      continue;
    }
    const auto [c, c_prime] = pair_constants(pair.y, bits);
    const double full = code_product(bi, bj);
    double pair_loss = 0.0;
    for (std::size_t k = 0; k < bits; ++k) {
      const double pik = proj.at(i, k);
      const double pjk = proj.at(j, k);
      const double s = sigmoid(pik * pjk);
      const double partial = full - bi.bit(k) * bj.bit(k) * inv_bits;
      const double weight = std::exp(-pair.y * partial);
      pair_loss += weight * (c + c_prime * (2.0 * s - 1.0));
      const double g_u = 2.0 * inv_bits * weight * c_prime * s * (1.0 - s);
      coef.at(i, k) += g_u * pjk;
      coef.at(j, k) += g_u * pik;
    }
    out.q += pair_loss * inv_bits;
  }

  out.grads.grad_w = matmul_tn(coef, z);
  out.grads.grad_z = matmul(coef, w);
  return out;
}

}  // namespace deephash
