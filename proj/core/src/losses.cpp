#include "w2s/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "w2s/error.hpp"

namespace w2s {
namespace {

void require_same_length(std::span<const double> a, std::span<const double> b,
                         const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": length " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
}

std::vector<double> row_norms(const PrototypeMatrix& prototypes) {
  std::vector<double> norms(prototypes.classes());
  for (std::size_t j = 0; j < norms.size(); ++j) {
    norms[j] = norm(prototypes.row(j));
    if (!(norms[j] > 0.0)) {
      throw DomainError("zero-norm prototype row " + std::to_string(j), j);
    }
  }
  return norms;
}

std::vector<double> cosine_with_norms(const PrototypeMatrix& prototypes,
                                      std::span<const double> norms,
                                      std::span<const double> r, std::size_t sample) {
  if (r.size() != prototypes.dim()) {
    throw ShapeError("embedding has dimension " + std::to_string(r.size()) +
                     ", prototypes have " + std::to_string(prototypes.dim()));
  }
  const double r_norm = norm(r);
  if (!(r_norm > 0.0)) {
    throw DomainError("zero-norm embedding" +
                          (sample == DomainError::kNoIndex
                               ? std::string()
                               : " at sample " + std::to_string(sample)),
                      sample);
  }
  std::vector<double> z(prototypes.classes());
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double c = dot(prototypes.row(j), r) / (norms[j] * r_norm);
    z[j] = std::clamp(c, -1.0, 1.0);
  }
  return z;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double max_prob(std::span<const double> z) {
  const auto p = soften(z, Temperature(1.0));
  return *std::max_element(p.begin(), p.end());
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DomainError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

void check_label(std::size_t label, std::size_t k) {
  if (label >= k) {
    throw IndexError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(k) + " classes");
  }
}

}  // namespace

std::vector<double> cosine_logits(const PrototypeMatrix& prototypes,
                                  std::span<const double> r) {
  const auto norms = row_norms(prototypes);
  return cosine_with_norms(prototypes, norms, r, DomainError::kNoIndex);
}

LogitMatrix cosine_logits(const PrototypeMatrix& prototypes,
                          const EmbeddingMatrix& embeddings) {
  const auto norms = row_norms(prototypes);
  LogitMatrix out{Matrix(embeddings.samples(), prototypes.classes()), LogitSource::kStrong};
  for (std::size_t i = 0; i < embeddings.samples(); ++i) {
    const auto z = cosine_with_norms(prototypes, norms, embeddings.row(i), i);
    std::copy(z.begin(), z.end(), out.data.row(i).begin());
  }
  return out;
}

std::vector<double> log_soften(std::span<const double> z, Temperature tau) {
  if (z.empty()) throw ShapeError("soften: empty logit vector");
  const double t = tau.value();
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = (z[i] - top) / t;
    sum += std::exp(out[i]);
  }
  const double log_sum = std::log(sum);
  for (double& v : out) v -= log_sum;
  return out;
}

std::vector<double> soften(std::span<const double> z, Temperature tau) {
  if (z.empty()) throw ShapeError("soften: empty logit vector");
  const double t = tau.value();
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - top) / t);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

ProbMatrix soften(const LogitMatrix& logits, Temperature tau) {
  ProbMatrix out{Matrix(logits.samples(), logits.classes()), tau};
  for (std::size_t i = 0; i < logits.samples(); ++i) {
    const auto p = soften(logits.data.row(i), tau);
    std::copy(p.begin(), p.end(), out.data.row(i).begin());
  }
  return out;
}

LogitLoss kd_loss_grad(std::span<const double> z_s, std::span<const double> z_w,
                       Temperature tau, KlDirection direction) {
  require_same_length(z_s, z_w, "kd_loss");
  const auto log_ps = log_soften(z_s, tau);
  const auto log_pw = log_soften(z_w, tau);
  const std::size_t k = z_s.size();
  const double t = tau.value();

  LogitLoss out;
  out.grad.resize(k);
  if (direction == KlDirection::kWeakToStrong) {
    for (std::size_t i = 0; i < k; ++i) {
      const double pw = std::exp(log_pw[i]);
      if (pw > 0.0) out.value += pw * (log_pw[i] - log_ps[i]);
      out.grad[i] = (std::exp(log_ps[i]) - pw) / t;
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      const double ps = std::exp(log_ps[i]);
      if (ps > 0.0) out.value += ps * (log_ps[i] - log_pw[i]);
    }
    // d/dz_j sum_i p_i (log p_i - log q_i) = p_j (a_j - L) / tau
    for (std::size_t j = 0; j < k; ++j) {
      const double ps = std::exp(log_ps[j]);
      out.grad[j] = ps * ((log_ps[j] - log_pw[j]) - out.value) / t;
    }
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

double kd_loss(std::span<const double> z_s, std::span<const double> z_w,
               Temperature tau, KlDirection direction) {
  return kd_loss_grad(z_s, z_w, tau, direction).value;
}

double cpl_loss(const PrototypeMatrix& prototypes, std::span<const double> r,
                std::span<const double> z_w, Temperature tau, KlDirection direction) {
  return kd_loss(cosine_logits(prototypes, r), z_w, tau, direction);
}

double cpl_batch_loss(const PrototypeMatrix& prototypes, const EmbeddingMatrix& batch,
                      const LogitMatrix& weak_logits, Temperature tau,
                      KlDirection direction) {
  if (weak_logits.samples() != batch.samples()) {
    throw ShapeError("weak logits have " + std::to_string(weak_logits.samples()) +
                     " rows for a batch of " + std::to_string(batch.samples()));
  }
  const auto norms = row_norms(prototypes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.samples(); ++i) {
    const auto z = cosine_with_norms(prototypes, norms, batch.row(i), i);
    total += kd_loss(z, weak_logits.data.row(i), tau, direction);
  }
  return total / static_cast<double>(batch.samples());
}

void accumulate_cosine_grad(const PrototypeMatrix& prototypes,
                            std::span<const double> r, std::span<const double> z,
                            std::span<const double> dz, double scale, Matrix& grad) {
  const double r_norm = norm(r);
  for (std::size_t j = 0; j < prototypes.classes(); ++j) {
    if (dz[j] == 0.0) continue;
    const auto c = prototypes.row(j);
    const double c_norm = norm(c);
    // dz_j/dC_j = r / (|C_j||r|) - z_j C_j / |C_j|^2
    const double a = scale * dz[j] / (c_norm * r_norm);
    const double b = scale * dz[j] * z[j] / (c_norm * c_norm);
    auto g = grad.row(j);
    for (std::size_t m = 0; m < c.size(); ++m) g[m] += a * r[m] - b * c[m];
  }
}

Matrix cpl_grad(const PrototypeMatrix& prototypes, const EmbeddingMatrix& batch,
                const LogitMatrix& weak_logits, Temperature tau, KlDirection direction) {
  if (weak_logits.samples() != batch.samples()) {
    throw ShapeError("weak logits have " + std::to_string(weak_logits.samples()) +
                     " rows for a batch of " + std::to_string(batch.samples()));
  }
  const auto norms = row_norms(prototypes);
  Matrix grad(prototypes.classes(), prototypes.dim());
  for (std::size_t i = 0; i < batch.samples(); ++i) {
    const auto r = batch.row(i);
    const auto z = cosine_with_norms(prototypes, norms, r, i);
    const auto loss = kd_loss_grad(z, weak_logits.data.row(i), tau, direction);
    accumulate_cosine_grad(prototypes, r, z, loss.grad, 1.0, grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.samples());
  for (double& v : grad.values()) v *= inv;
  return grad;
}

std::vector<double> lp_logits(const LinearProbe& probe, std::span<const double> r) {
  if (r.size() != probe.dim()) {
    throw ShapeError("embedding has dimension " + std::to_string(r.size()) +
                     ", probe expects " + std::to_string(probe.dim()));
  }
  std::vector<double> z(probe.classes());
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = dot(probe.weights.row(j), r) + probe.bias[j];
  }
  return z;
}

LogitMatrix lp_logits(const LinearProbe& probe, const EmbeddingMatrix& embeddings,
                      LogitSource source) {
  LogitMatrix out{Matrix(embeddings.samples(), probe.classes()), source};
  for (std::size_t i = 0; i < embeddings.samples(); ++i) {
    const auto z = lp_logits(probe, embeddings.row(i));
    std::copy(z.begin(), z.end(), out.data.row(i).begin());
  }
  return out;
}

std::vector<double> lp_forward(const LinearProbe& probe, std::span<const double> r) {
  return soften(lp_logits(probe, r), Temperature(1.0));
}

void accumulate_linear_grad(std::span<const double> r, std::span<const double> dz,
                            double scale, Matrix& grad_w, std::vector<double>& grad_b) {
  for (std::size_t j = 0; j < dz.size(); ++j) {
    if (dz[j] == 0.0) continue;
    const double s = scale * dz[j];
    auto g = grad_w.row(j);
    for (std::size_t m = 0; m < r.size(); ++m) g[m] += s * r[m];
    grad_b[j] += s;
  }
}

double ce_loss(std::span<const double> p_s, std::size_t label) {
  check_label(label, p_s.size());
  return -std::log(p_s[label]);
}

double aux_conf_loss(std::span<const double> p_s, std::size_t weak_label, double alpha) {
  check_alpha(alpha);
  check_label(weak_label, p_s.size());
  const std::size_t self_label = argmax(p_s);
  return (1.0 - alpha) * ce_loss(p_s, weak_label) + alpha * ce_loss(p_s, self_label);
}

double adapt_conf_beta(std::span<const double> z_s, std::span<const double> z_w) {
  require_same_length(z_s, z_w, "adapt_conf_beta");
  return sigmoid(max_prob(z_s) - max_prob(z_w));
}

double adapt_conf_loss(std::span<const double> z_s, std::span<const double> z_w,
                       Temperature tau) {
  return adapt_conf_loss_grad(z_s, z_w, tau).value;
}

LogitLoss ce_loss_grad(std::span<const double> z_s, std::size_t label, Temperature tau) {
  check_label(label, z_s.size());
  const auto log_p = log_soften(z_s, tau);
  LogitLoss out;
  out.value = -log_p[label];
  out.grad.resize(z_s.size());
  for (std::size_t j = 0; j < z_s.size(); ++j) {
    out.grad[j] = (std::exp(log_p[j]) - (j == label ? 1.0 : 0.0)) / tau.value();
  }
  return out;
}

LogitLoss aux_conf_loss_grad(std::span<const double> z_s, std::size_t weak_label,
                             double alpha, Temperature tau) {
  check_alpha(alpha);
  const std::size_t self_label = argmax(z_s);
  auto weak = ce_loss_grad(z_s, weak_label, tau);
  const auto self = ce_loss_grad(z_s, self_label, tau);
  weak.value = (1.0 - alpha) * weak.value + alpha * self.value;
  for (std::size_t j = 0; j < weak.grad.size(); ++j) {
    weak.grad[j] = (1.0 - alpha) * weak.grad[j] + alpha * self.grad[j];
  }
  return weak;
}

LogitLoss adapt_conf_loss_grad(std::span<const double> z_s, std::span<const double> z_w,
                               Temperature tau) {
  const double beta = adapt_conf_beta(z_s, z_w);
  auto self = ce_loss_grad(z_s, argmax(z_s), tau);
  const auto kd = kd_loss_grad(z_s, z_w, tau);
  self.value = beta * self.value + (1.0 - beta) * kd.value;
  for (std::size_t j = 0; j < self.grad.size(); ++j) {
    self.grad[j] = beta * self.grad[j] + (1.0 - beta) * kd.grad[j];
  }
  return self;
}

}  // namespace w2s
