#pragma once

// Exponentiated code-product hashing loss.
//
// For codes b_i, b_j in {-1,+1}^K and supervision y in {-1,0,+1}, the exact
// pair loss is exp(-y * <b_i, b_j>/K). Because each bit product is +/-1, the
// factor contributed by bit k linearises exactly as c + c' * b_i(k) b_j(k).
// Replacing that bit product by 2*sigmoid(w_k'z_i z_j'w_k) - 1 while holding
// the remaining K-1 bits fixed gives a smooth per-bit loss whose mean over k
// approximates the exact loss and saturates to it as |w_k'z_i z_j'w_k| grows.

#include <cstddef>
#include <span>
#include <vector>

#include "deephash/bitcode.hpp"
#include "deephash/supervision.hpp"
#include "deephash/tensor.hpp"

namespace deephash {

struct PairConstants {
  double c;
  double c_prime;
};

/// Normalised code product (1/K) sum_k b_i(k) b_j(k), via popcount.
double code_product(const BitCode& a, const BitCode& b);

/// Code product with bit k removed: code_product - b_i(k) b_j(k) / K.
double partial_code_product(const BitCode& a, const BitCode& b, std::size_t k);

/// exp(-y * code_product).
double atomic_loss(const BitCode& a, const BitCode& b, int y);

/// c = cosh(y/K), c' = -sinh(y/K).
PairConstants pair_constants(int y, std::size_t bits);

/// 1 / (1 + exp(-t)) with t clamped to [-500, 500].
double sigmoid(double t);

/// 2 * sigmoid(w'z_i * z_j'w) - 1.
double smoothed_bit_product(std::span<const double> w, std::span<const double> zi,
                            std::span<const double> zj);

/// Smoothed loss with only bit k active. `w` is the K x dim(z) hash head.
double bitwise_loss(std::span<const double> zi, std::span<const double> zj, const BitCode& bi,
                    const BitCode& bj, int y, const Tensor& w, std::size_t k);

/// Mean of bitwise_loss over all K bits.
double approx_pair_loss(std::span<const double> zi, std::span<const double> zj,
                        const BitCode& bi, const BitCode& bj, int y, const Tensor& w);

/// Gradients of approx_pair_loss for one pair, with the codes held fixed.
struct PairGradients {
  Tensor grad_w;   // K x dim(z)
  Tensor grad_zi;  // dim(z)
  Tensor grad_zj;  // dim(z)
};

PairGradients pair_gradients(std::span<const double> zi, std::span<const double> zj,
                             const BitCode& bi, const BitCode& bj, int y, const Tensor& w);

struct HashLayerGradients {
  Tensor grad_w;  // K x dim(z)
  Tensor grad_z;  // n x dim(z), one row per batch sample
};

struct BatchLoss {
  double q = 0.0;
  HashLayerGradients grads;
};

/// Codes sign(W z_i) for every row of z [n x dim(z)].
std::vector<BitCode> compute_codes(const Tensor& z, const Tensor& w);

/// Sum of approx_pair_loss over `pairs` and the summed gradients. Pair
/// positions index rows of `z` and entries of `codes`. Pairs with y = 0 add
/// exactly 1 to the loss and nothing to the gradients.
BatchLoss accumulate_batch(std::span<const SupervisedPair> pairs, const Tensor& z,
                           std::span<const BitCode> codes, const Tensor& w);

}  // namespace deephash
