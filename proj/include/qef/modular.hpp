#pragma once

// Modular machinery of a faithful state in finite dimension: modular and
// relative modular flows, Araki-Connes cocycles with their Dyson-series
// oracle, relative entropy, pinching, and the entropy-production cocycle
// c^t together with the observable sigma.
//
// Sign conventions, fixed once and validated by tests:
//   modular flow      varsigma_omega^theta(A) = omega^{i theta} A omega^{-i theta}
//   analytic extension varsigma_omega^{-i alpha}(A) = omega^alpha A omega^{-alpha}
//   KMS(-1) identity  omega(A varsigma^{-i}(B)) = omega(B A)
//   entropy production sigma = i [log omega, V]

#include "qef/linalg.hpp"
#include "qef/quadrature.hpp"
#include "qef/superop.hpp"
#include "qef/system.hpp"

namespace qef {

/// varsigma_omega^theta(A), real modular time.
inline Mat modular_flow(const DensityMatrix& omega, double theta, const Mat& a) {
  Mat u = omega.power(Complex(0, theta));
  return u * a * u.adjoint();
}

/// varsigma_omega^{-i alpha}(A) = omega^alpha A omega^{-alpha}, entire in alpha.
inline Mat analytic_flow(const DensityMatrix& omega, Complex alpha, const Mat& a) {
  return omega.power(alpha) * a * omega.power(-alpha);
}

/// Araki-Connes cocycle [D mu : D nu]_alpha = mu^alpha nu^{-alpha}.
inline Mat connes_cocycle(const DensityMatrix& mu, const DensityMatrix& nu,
                          Complex alpha) {
  return mu.power(alpha) * nu.power(-alpha);
}

/// [D omega_t : D omega]_alpha for the evolved reference state.
inline Mat connes_cocycle_t(const FiniteQuantumSystem& sys, double t, Complex alpha) {
  Mat u = sys.propagator(t);
  return u * sys.omega().power(alpha) * u.adjoint() * sys.omega().power(-alpha);
}

/// Relative entropy Ent(nu|mu) = tr(nu (log mu - log nu)) <= 0.
inline double relative_entropy(const DensityMatrix& nu, const DensityMatrix& mu) {
  return (nu.mat() * (mu.log() - nu.log())).trace().real();
}

/// Cross-check route for the relative entropy through the superoperator
/// logarithm of the relative modular operator: <Omega_nu, log Delta_{mu|nu} Omega_nu>.
inline double relative_entropy_gns(const DensityMatrix& nu, const DensityMatrix& mu) {
  const int d = nu.dim();
  if (d * d > tolerances().dense_dim_cap)
    throw Error("relative_entropy_gns: dimension cap exceeded");
  Mat delta = kron(nu.power(-1).transpose(), mu.mat());  // dense Delta_{mu|nu}
  Mat logdelta = herm_fn(delta, [](double x) {
    if (x <= 0) throw Error("relative_entropy_gns: Delta not positive");
    return std::log(x);
  });
  Vec omega_nu = vec(nu.power(0.5));
  return (omega_nu.adjoint() * logdelta * omega_nu)(0).real();
}

/// Pinching of nu onto the spectral blocks of omega; realizes the infinite
/// Cesaro average of nu over the modular flow of omega.
inline Mat pinch(const Mat& nu, const DensityMatrix& omega) {
  auto groups = group_close(omega.eigenvalues(), tolerances().eig_grouping);
  const Mat& u = omega.eigenvectors();
  Mat nut = u.adjoint() * nu * u;
  Mat out = Mat::Zero(nu.rows(), nu.cols());
  for (const auto& g : groups)
    for (int i : g)
      for (int j : g) out(i, j) = nut(i, j);
  return u * out * u.adjoint();
}

// ---------------------------------------------------------------------------
// Entropy production cocycle
// ---------------------------------------------------------------------------

/// ell_{omega_t|omega} = log omega_t - log omega.
inline Mat ell(const FiniteQuantumSystem& sys, double t) {
  Mat u = sys.propagator(t);
  return u * sys.omega().log() * u.adjoint() - sys.omega().log();
}

/// c^t = tau^t(ell_{omega_t|omega}) = log omega - tau^t(log omega).
inline Mat cocycle_ct(const FiniteQuantumSystem& sys, double t) {
  return sys.omega().log() - sys.heisenberg(sys.omega().log(), t);
}

/// sigma = i [log omega, V]; vanishing coupling simply yields 0.
inline Mat entropy_production_sigma(const OpenQuantumSystem& open) {
  const Mat logw = open.omega().log();
  return kI * (logw * open.V() - open.V() * logw);
}

/// sigma evolved to time s (the integrand of the entropy balance).
inline Mat sigma_at(const OpenQuantumSystem& open, double s) {
  return open.sys().heisenberg(entropy_production_sigma(open), s);
}

// ---------------------------------------------------------------------------
// Dyson-series oracle for the cocycle
// ---------------------------------------------------------------------------

/// [D omega_t : D omega]_alpha as a truncated Dyson series
///   1 + sum_n (it)^n  int_{0<=th_1<=...<=th_n<=1}
///         tau^{-t th_n}(W) ... tau^{-t th_1}(W) dth,   W = W_{2 alpha},
/// with nested Gauss-Legendre quadrature. Independent of the closed form
/// mu^alpha nu^{-alpha}; this is the series route, kept as an oracle.
inline Mat connes_cocycle_dyson(const OpenQuantumSystem& open, double t,
                                Complex alpha, int order, int nodes = 20) {
  if (order < 1) throw Error("connes_cocycle_dyson: order must be >= 1");
  if (order > 4) throw Error("connes_cocycle_dyson: order > 4 rejected (cost guard)");
  const FiniteQuantumSystem& sys = open.sys();
  const int d = sys.dim();
  const Mat w2a = analytic_flow(sys.omega(), alpha, open.V()) - open.V();

  // everything in the H eigenbasis so tau^{-s} is an elementwise phase twist
  const HermEig& he = sys.h_eig();
  const Mat wt = he.vectors.adjoint() * w2a * he.vectors;
  auto twisted = [&](double th) {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        m(i, j) = wt(i, j) * std::exp(Complex(0, -t * th * (he.values(i) - he.values(j))));
    return m;
  };

  GaussLegendre gl = gauss_legendre(nodes);
  // J_k(u) = int_0^u twisted(th) J_{k-1}(th) dth, J_0 = 1
  std::function<Mat(int, double)> level = [&](int k, double u) -> Mat {
    Mat acc = Mat::Zero(d, d);
    for (int q = 0; q < nodes; ++q) {
      double th = u * gl.nodes[q];
      Mat inner = k == 1 ? Mat(Mat::Identity(d, d)) : level(k - 1, th);
      acc += (u * gl.weights[q]) * (twisted(th) * inner);
    }
    return acc;
  };

  Mat result = Mat::Identity(d, d);
  Complex it_pow(1, 0);
  for (int n = 1; n <= order; ++n) {
    it_pow *= Complex(0, t);
    result += it_pow * (he.vectors * level(n, 1.0) * he.vectors.adjoint());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Identity residuals
// ---------------------------------------------------------------------------

struct CocycleResiduals {
  double multiplicative;  // tau-cocycle relation at (t, s, alpha)
  double chain_rule;      // [Dmu:Dnu][Dnu:Domega] = [Dmu:Domega]
  double gen_cocycle;     // [Dmu:Dnu]_{a+b} = [Dmu:Dnu]_a vs_nu^{-ia}([Dmu:Dnu]_b)
};

/// Residuals of the cocycle identities, all evaluated both sides as matrices.
inline CocycleResiduals multiplicative_cocycle_check(const FiniteQuantumSystem& sys,
                                                     double t, double s, Complex alpha,
                                                     std::uint64_t seed = 7) {
  CocycleResiduals r{};
  {
    Mat lhs = connes_cocycle_t(sys, t + s, alpha);
    Mat rhs = sys.heisenberg(connes_cocycle_t(sys, s, alpha), -t) *
              connes_cocycle_t(sys, t, alpha);
    r.multiplicative = max_abs(lhs - rhs);
  }
  Rng rng(seed);
  const int d = sys.dim();
  DensityMatrix mu(rng.density(d)), nu(rng.density(d));
  {
    Mat lhs = connes_cocycle(mu, nu, alpha) * connes_cocycle(nu, sys.omega(), alpha);
    Mat rhs = connes_cocycle(mu, sys.omega(), alpha);
    r.chain_rule = max_abs(lhs - rhs);
  }
  {
    Complex a1(0, rng.uniform(-1, 1)), a2(0, rng.uniform(-1, 1));
    Mat lhs = connes_cocycle(mu, nu, a1 + a2);
    // varsigma_nu^{-i a1} is analytic_flow(nu, a1, .)
    Mat rhs = connes_cocycle(mu, nu, a1) *
              analytic_flow(nu, a1, connes_cocycle(mu, nu, a2));
    r.gen_cocycle = max_abs(lhs - rhs);
  }
  return r;
}

}  // namespace qef
