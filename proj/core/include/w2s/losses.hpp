#pragma once

// Logit heads, tempered softmax and every training loss, with analytic
// gradients with respect to the strong logits.
//
// Conventions:
//   * KL terms are computed from log-softmax differences; probabilities are
//     never divided, so an underflowed strong probability cannot yield Inf.
//   * Batch reductions sum samples left to right, then divide by |B|.

#include <cstddef>
#include <span>
#include <vector>

#include "w2s/matrix.hpp"
#include "w2s/types.hpp"

namespace w2s {

/// Which KL the alignment loss minimises.
///   kWeakToStrong: sum_i p^w_i log(p^w_i / p^s_i)  (default; weak soft targets)
///   kStrongToWeak: sum_i p^s_i log(p^s_i / p^w_i)
enum class KlDirection { kWeakToStrong, kStrongToWeak };

/// Cosine similarity between `r` and every prototype row; each entry in [-1, 1].
/// Throws DomainError for a zero-norm embedding or prototype row.
std::vector<double> cosine_logits(const PrototypeMatrix& prototypes,
                                  std::span<const double> r);

/// Row-wise cosine logits. A zero-norm embedding reports its sample index.
LogitMatrix cosine_logits(const PrototypeMatrix& prototypes,
                          const EmbeddingMatrix& embeddings);

/// softmax(z / tau), max-subtracted.
std::vector<double> soften(std::span<const double> z, Temperature tau);
std::vector<double> log_soften(std::span<const double> z, Temperature tau);
ProbMatrix soften(const LogitMatrix& logits, Temperature tau);

/// KL between soften(z_w) and soften(z_s) in the given direction.
double kd_loss(std::span<const double> z_s, std::span<const double> z_w,
               Temperature tau, KlDirection direction = KlDirection::kWeakToStrong);

/// Alignment loss of one sample: kd_loss(cosine_logits(C, r), z_w, tau).
double cpl_loss(const PrototypeMatrix& prototypes, std::span<const double> r,
                std::span<const double> z_w, Temperature tau,
                KlDirection direction = KlDirection::kWeakToStrong);

/// Mean of cpl_loss over the batch.
double cpl_batch_loss(const PrototypeMatrix& prototypes, const EmbeddingMatrix& batch,
                      const LogitMatrix& weak_logits, Temperature tau,
                      KlDirection direction = KlDirection::kWeakToStrong);

/// d/dC of cpl_batch_loss, k x d. Row j is orthogonal to C_j.
Matrix cpl_grad(const PrototypeMatrix& prototypes, const EmbeddingMatrix& batch,
                const LogitMatrix& weak_logits, Temperature tau,
                KlDirection direction = KlDirection::kWeakToStrong);

std::vector<double> lp_logits(const LinearProbe& probe, std::span<const double> r);
LogitMatrix lp_logits(const LinearProbe& probe, const EmbeddingMatrix& embeddings,
                      LogitSource source);

/// softmax(W r + b) at tau = 1.
std::vector<double> lp_forward(const LinearProbe& probe, std::span<const double> r);

/// -log p_s[label]. Throws IndexError for an out-of-range label.
double ce_loss(std::span<const double> p_s, std::size_t label);

/// (1 - alpha) * ce(p_s, weak_label) + alpha * ce(p_s, argmax p_s).
/// Throws DomainError unless alpha is in [0, 1].
double aux_conf_loss(std::span<const double> p_s, std::size_t weak_label, double alpha);

/// Gate of the adaptive-confidence loss:
/// sigmoid(max softmax(z_s) - max softmax(z_w)), both at tau = 1.
double adapt_conf_beta(std::span<const double> z_s, std::span<const double> z_w);

/// beta * ce(soften(z_s, tau), argmax z_s) + (1 - beta) * kd_loss(z_s, z_w, tau).
double adapt_conf_loss(std::span<const double> z_s, std::span<const double> z_w,
                       Temperature tau);

// ---------------------------------------------------------------------------
// Per-sample loss value and gradient with respect to the strong logits z_s.
// Hard pseudo-labels (argmax terms) and the adaptive gate are treated as
// constants when differentiating.

struct LogitLoss {
  double value = 0.0;
  std::vector<double> grad;  // dL/dz_s
};

LogitLoss kd_loss_grad(std::span<const double> z_s, std::span<const double> z_w,
                       Temperature tau,
                       KlDirection direction = KlDirection::kWeakToStrong);

/// Cross-entropy of soften(z_s, tau) against a hard label.
LogitLoss ce_loss_grad(std::span<const double> z_s, std::size_t label, Temperature tau);

LogitLoss aux_conf_loss_grad(std::span<const double> z_s, std::size_t weak_label,
                             double alpha, Temperature tau);

LogitLoss adapt_conf_loss_grad(std::span<const double> z_s, std::span<const double> z_w,
                               Temperature tau);

/// grad += scale * (dz)^T d(cosine logits)/dC for one sample.
/// `z` must be cosine_logits(prototypes, r).
void accumulate_cosine_grad(const PrototypeMatrix& prototypes,
                            std::span<const double> r, std::span<const double> z,
                            std::span<const double> dz, double scale, Matrix& grad);

/// grad_w += scale * dz r^T, grad_b += scale * dz.
void accumulate_linear_grad(std::span<const double> r, std::span<const double> dz,
                            double scale, Matrix& grad_w, std::vector<double>& grad_b);

}  // namespace w2s
