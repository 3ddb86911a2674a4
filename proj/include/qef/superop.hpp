#pragma once

// Superoperators on a d-dimensional matrix algebra, kept in factored form
// X -> sum_k A_k X B_k and densified to d^2 x d^2 only on demand. The dense
// encoding uses column-stacking vectorization, so a term (A, B) densifies to
// kron(B^T, A).

#include "qef/linalg.hpp"

#include <functional>

namespace qef {

class SuperOperator {
 public:
  SuperOperator() = default;
  explicit SuperOperator(int dim) : dim_(dim) {}

  static SuperOperator zero(int d) { return SuperOperator(d); }

  static SuperOperator identity(int d) {
    return sandwich(Mat::Identity(d, d), Mat::Identity(d, d));
  }

  /// X -> A X
  static SuperOperator left_mult(const Mat& a) {
    return sandwich(a, Mat::Identity(a.rows(), a.cols()));
  }

  /// X -> X B
  static SuperOperator right_mult(const Mat& b) {
    return sandwich(Mat::Identity(b.rows(), b.cols()), b);
  }

  /// X -> A X B
  static SuperOperator sandwich(Mat a, Mat b) {
    SuperOperator s(static_cast<int>(a.rows()));
    s.terms_.emplace_back(std::move(a), std::move(b));
    return s;
  }

  /// X -> [H, X]
  static SuperOperator commutator(const Mat& h) {
    SuperOperator s = left_mult(h);
    s.add(-Mat::Identity(h.rows(), h.cols()), h);
    return s;
  }

  SuperOperator& add(Mat a, Mat b) {
    if (dim_ == 0) dim_ = static_cast<int>(a.rows());
    if (a.rows() != dim_ || b.rows() != dim_)
      throw Error("SuperOperator: term dimension mismatch");
    terms_.emplace_back(std::move(a), std::move(b));
    return *this;
  }

  SuperOperator& operator+=(const SuperOperator& o) {
    if (dim_ == 0) dim_ = o.dim_;
    if (o.dim_ != dim_) throw Error("SuperOperator: dimension mismatch");
    for (const auto& t : o.terms_) terms_.push_back(t);
    return *this;
  }

  friend SuperOperator operator+(SuperOperator a, const SuperOperator& b) {
    a += b;
    return a;
  }

  SuperOperator scaled(Complex c) const {
    SuperOperator s(dim_);
    for (const auto& [a, b] : terms_) s.terms_.emplace_back(c * a, b);
    return s;
  }

  friend SuperOperator operator-(SuperOperator a, const SuperOperator& b) {
    a += b.scaled(-1.0);
    return a;
  }

  int dim() const { return dim_; }
  int term_count() const { return static_cast<int>(terms_.size()); }

  Mat apply(const Mat& x) const {
    Mat out = Mat::Zero(dim_, dim_);
    for (const auto& [a, b] : terms_) out.noalias() += a * x * b;
    return out;
  }

  Vec apply_vec(const Vec& v) const { return vec(apply(unvec(v, dim_))); }

  /// Hilbert-Schmidt adjoint: X -> sum_k A_k^dag X B_k^dag.
  SuperOperator adjoint() const {
    SuperOperator s(dim_);
    for (const auto& [a, b] : terms_) s.terms_.emplace_back(a.adjoint(), b.adjoint());
    return s;
  }

  /// Dense d^2 x d^2 matrix. Guarded by the configured dimension cap.
  Mat dense() const {
    if (dim_ * dim_ > tolerances().dense_dim_cap)
      throw Error("SuperOperator: dense form exceeds dimension cap, use factored evaluation");
    Mat out = Mat::Zero(dim_ * dim_, dim_ * dim_);
    for (const auto& [a, b] : terms_) out += kron(b.transpose(), a);
    return out;
  }

  /// Crude upper bound on the induced norm, used to pick time steps for the
  /// Taylor-stepped exponential action.
  double norm_bound() const {
    double s = 0.0;
    for (const auto& [a, b] : terms_) s += a.norm() * b.norm();  // Frobenius
    return s;
  }

 private:
  int dim_ = 0;
  std::vector<std::pair<Mat, Mat>> terms_;
};

/// exp(scale * S) applied to a matrix without densifying S: the interval is
/// split so each step has norm below ~2 and summed by a plain Taylor series.
inline Mat expm_apply(const SuperOperator& s, Complex scale, const Mat& x0,
                      double tol = 1e-15) {
  double bound = std::abs(scale) * s.norm_bound();
  if (bound > tolerances().expm_overflow * 10)
    throw Error("expm_apply: ||scale*S|| exceeds overflow guard");
  int steps = std::max(1, static_cast<int>(std::ceil(bound / 2.0)));
  Complex h = scale / static_cast<double>(steps);
  Mat x = x0;
  for (int st = 0; st < steps; ++st) {
    Mat acc = x;
    Mat term = x;
    for (int k = 1; k <= 64; ++k) {
      term = s.apply(term) * (h / static_cast<double>(k));
      acc += term;
      if (max_abs(term) <= tol * std::max(1.0, max_abs(acc))) break;
    }
    x = acc;
  }
  return x;
}

inline Vec expm_apply_vec(const SuperOperator& s, Complex scale, const Vec& v,
                          double tol = 1e-15) {
  return vec(expm_apply(s, scale, unvec(v, s.dim()), tol));
}

// ---------------------------------------------------------------------------
// GNS vectorization of a faithful state
// ---------------------------------------------------------------------------

/// Vectorized (GNS) representation induced by a faithful density matrix:
/// the algebra acts by left multiplication, Omega = vec(omega^{1/2}), the
/// modular conjugation is vec(X) -> vec(X^dag), and relative modular powers
/// act as vec(X) -> vec(mu^z X nu^{-z}).
class GnsSpace {
 public:
  explicit GnsSpace(DensityMatrix omega)
      : omega_(std::move(omega)), d_(omega_.dim()) {
    Omega_ = vec(omega_.power(0.5));
  }

  int base_dim() const { return d_; }
  int dim() const { return d_ * d_; }
  const DensityMatrix& omega() const { return omega_; }
  const Vec& Omega() const { return Omega_; }

  SuperOperator pi(const Mat& a) const { return SuperOperator::left_mult(a); }

  /// Modular conjugation (antilinear).
  Vec J(const Vec& v) const { return vec(Mat(unvec(v, d_).adjoint())); }

  /// Relative modular power Delta_{mu|nu}^z : vec(X) -> vec(mu^z X nu^{-z}).
  SuperOperator delta_power(const DensityMatrix& mu, const DensityMatrix& nu,
                            Complex z) const {
    return SuperOperator::sandwich(mu.power(z), nu.power(-z));
  }

  SuperOperator delta_omega_power(Complex z) const {
    return delta_power(omega_, omega_, z);
  }

  /// Natural-cone representative of a faithful state.
  Vec cone_vector(const DensityMatrix& nu) const { return vec(nu.power(0.5)); }

 private:
  DensityMatrix omega_;
  int d_;
  Vec Omega_;
};

}  // namespace qef
