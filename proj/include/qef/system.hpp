#pragma once

// Finite quantum dynamical systems and thermally driven open systems built
// from a small system and finite reservoir blocks. Composite operators are
// assembled by Kronecker embedding in the fixed factor order (S, R_1, ..., R_M).

#include "qef/linalg.hpp"

#include <optional>

namespace qef {

/// A finite quantum dynamical system: Hamiltonian H, faithful reference state
/// omega, Heisenberg evolution A_t = e^{itH} A e^{-itH} and Schroedinger
/// evolution nu_t = e^{-itH} nu e^{itH} (so that tr(nu A_t) = tr(nu_t A)).
class FiniteQuantumSystem {
 public:
  FiniteQuantumSystem() = default;
  FiniteQuantumSystem(HermitianOperator h, DensityMatrix omega)
      : H_(std::move(h)), omega_(std::move(omega)) {
    if (H_.dim() != omega_.dim())
      throw Error("FiniteQuantumSystem: H and omega dimension mismatch");
    heig_ = herm_eig(H_.mat());
    tri_ = max_imag(H_.mat()) <= 1e-12 && max_imag(omega_.mat()) <= 1e-12;
  }

  int dim() const { return H_.dim(); }
  const Mat& H() const { return H_.mat(); }
  const DensityMatrix& omega() const { return omega_; }
  bool is_tri() const { return tri_; }
  const HermEig& h_eig() const { return heig_; }

  /// e^{-itH}
  Mat propagator(double t) const {
    Vec ph(heig_.values.size());
    for (Eigen::Index k = 0; k < ph.size(); ++k)
      ph(k) = std::exp(Complex(0, -t * heig_.values(k)));
    return heig_.vectors * ph.asDiagonal() * heig_.vectors.adjoint();
  }

  Mat heisenberg(const Mat& a, double t) const {
    Mat u = propagator(-t);  // e^{itH}
    return u * a * u.adjoint();
  }

  DensityMatrix evolve(const DensityMatrix& nu, double t) const {
    Mat u = propagator(t);
    return DensityMatrix(Mat(u * nu.mat() * u.adjoint()));
  }

  /// State at time -t as a plain matrix: e^{itH} omega e^{-itH}.
  Mat omega_minus_t(double t) const {
    Mat u = propagator(-t);
    return u * omega_.mat() * u.adjoint();
  }

  /// omega_{-t}^z through the cached eigensystems.
  Mat omega_minus_t_power(double t, Complex z) const {
    Mat u = propagator(-t);
    return u * omega_.power(z) * u.adjoint();
  }

 private:
  HermitianOperator H_;
  DensityMatrix omega_;
  HermEig heig_;
  bool tri_ = false;
};

struct Reservoir {
  HermitianOperator H;
  double beta = 1.0;

  Reservoir(HermitianOperator h, double beta_) : H(std::move(h)), beta(beta_) {
    if (beta <= 0.0) throw Error("Reservoir: beta must be positive");
  }

  int dim() const { return H.dim(); }

  /// Gibbs state e^{-beta H} / Z.
  DensityMatrix gibbs() const {
    Mat g = herm_fn(H.mat(), [&](double e) { return std::exp(-beta * e); });
    g /= g.trace();
    return DensityMatrix(g);
  }
};

namespace detail {

/// Embed an operator acting on (S, R_j) into the full product S x R_1 x ... x R_M.
inline Mat embed_coupling(const Mat& w, int ds, const std::vector<int>& rdims, int j) {
  int total = ds;
  for (int rd : rdims) total *= rd;
  const int dj = rdims[j];
  // strides of the composite index (s, r_1, ..., r_M), row-major over factors
  std::vector<int> stride(rdims.size() + 1);
  stride[rdims.size()] = 1;
  for (int k = static_cast<int>(rdims.size()) - 1; k >= 0; --k)
    stride[k] = stride[k + 1] * rdims[k];
  const int s_stride = stride[0];
  const int j_stride = stride[j + 1];

  Mat out = Mat::Zero(total, total);
  // enumerate the spectator configuration and scatter the (s, r_j) block
  int spectator_count = total / (ds * dj);
  for (int spec = 0; spec < spectator_count; ++spec) {
    // decode spectator into a base composite offset with s = r_j = 0
    int rem = spec, base = 0;
    for (size_t k = 0; k < rdims.size(); ++k) {
      if (static_cast<int>(k) == j) continue;
      int cap = rdims[k];
      base += (rem % cap) * stride[k + 1];
      rem /= cap;
    }
    for (int s = 0; s < ds; ++s)
      for (int s2 = 0; s2 < ds; ++s2)
        for (int r = 0; r < dj; ++r)
          for (int r2 = 0; r2 < dj; ++r2)
            out(base + s * s_stride + r * j_stride,
                base + s2 * s_stride + r2 * j_stride) = w(s * dj + r, s2 * dj + r2);
  }
  return out;
}

inline Mat embed_factor(const Mat& a, int ds, const std::vector<int>& rdims, int slot) {
  // slot -1 = small system, otherwise reservoir index
  Mat out = slot == -1 ? a : Mat(Mat::Identity(ds, ds));
  for (size_t k = 0; k < rdims.size(); ++k)
    out = kron(out, static_cast<int>(k) == slot
                        ? a
                        : Mat(Mat::Identity(rdims[k], rdims[k])));
  return out;
}

}  // namespace detail

/// Open quantum system: small system S with [H_S, omega_S] = 0, reservoirs at
/// inverse temperatures beta_j in Gibbs states, couplings V_j supported on
/// S x R_j, total V = lambda * sum_j V_j and H = H_fr + V. The reference state
/// omega = omega_S x omega_1 x ... x omega_M commutes with H_fr.
class OpenQuantumSystem {
 public:
  OpenQuantumSystem(FiniteQuantumSystem small, std::vector<Reservoir> reservoirs,
                    std::vector<HermitianOperator> couplings, double lambda)
      : small_(std::move(small)),
        reservoirs_(std::move(reservoirs)),
        lambda_(lambda) {
    const int ds = small_.dim();
    if (max_abs(small_.H() * small_.omega().mat() - small_.omega().mat() * small_.H()) >
        1e-12 * (1.0 + max_abs(small_.H())))
      throw Error("OpenQuantumSystem: omega_S does not commute with H_S");
    if (couplings.size() != reservoirs_.size())
      throw Error("OpenQuantumSystem: one coupling per reservoir required");

    std::vector<int> rdims;
    for (const auto& r : reservoirs_) rdims.push_back(r.dim());

    Mat hfr = detail::embed_factor(small_.H(), ds, rdims, -1);
    Mat omega = small_.omega().mat();
    for (size_t j = 0; j < reservoirs_.size(); ++j) {
      hfr += detail::embed_factor(reservoirs_[j].H.mat(), ds, rdims,
                                  static_cast<int>(j));
      omega = kron(omega, reservoirs_[j].gibbs().mat());
    }

    Mat v = Mat::Zero(hfr.rows(), hfr.cols());
    for (size_t j = 0; j < couplings.size(); ++j) {
      const Mat& w = couplings[j].mat();
      if (w.rows() != Eigen::Index(ds) * rdims[j])
        throw Error("OpenQuantumSystem: coupling dimension mismatch");
      v += detail::embed_coupling(w, ds, rdims, static_cast<int>(j));
    }
    v *= lambda_;

    Hfr_ = hfr;
    V_ = v;
    sys_ = FiniteQuantumSystem(HermitianOperator(hfr + v), DensityMatrix(omega));
    if (max_abs(omega * hfr - hfr * omega) > 1e-12 * (1.0 + max_abs(hfr)))
      throw Error("OpenQuantumSystem: [omega, H_fr] does not vanish");
  }

  const FiniteQuantumSystem& sys() const { return sys_; }
  const FiniteQuantumSystem& small() const { return small_; }
  const std::vector<Reservoir>& reservoirs() const { return reservoirs_; }
  int dim() const { return sys_.dim(); }
  const Mat& H_fr() const { return Hfr_; }
  const Mat& V() const { return V_; }
  double lambda() const { return lambda_; }
  const DensityMatrix& omega() const { return sys_.omega(); }

  /// Entropy observable S = -log omega.
  Mat entropy_observable() const { return -sys_.omega().log(); }

 private:
  FiniteQuantumSystem small_;
  std::vector<Reservoir> reservoirs_;
  double lambda_;
  FiniteQuantumSystem sys_;
  Mat Hfr_, V_;
};

// ---------------------------------------------------------------------------
// Dynamics helpers
// ---------------------------------------------------------------------------

inline DensityMatrix evolve_state(const FiniteQuantumSystem& sys,
                                  const DensityMatrix& nu, double t) {
  return sys.evolve(nu, t);
}

inline Mat heisenberg(const FiniteQuantumSystem& sys, const Mat& a, double t) {
  return sys.heisenberg(a, t);
}

struct NessResult {
  DensityMatrix state;
  /// Pairs of (near-)coinciding distinct Bohr gaps, where the block pinching
  /// and the true Cesaro limit may differ.
  std::vector<std::pair<double, double>> degenerate_gap_pairs;
};

/// Cesaro / Bohr NESS: pinching of omega onto the spectral blocks of H.
/// Exact infinite-time average when no two distinct Bohr gaps coincide;
/// near-coincidences are reported, not fixed.
inline NessResult ness_cesaro(const FiniteQuantumSystem& sys) {
  const HermEig& e = sys.h_eig();
  auto groups = group_close(e.values, tolerances().eig_grouping);
  const Mat rho_tilde = e.vectors.adjoint() * sys.omega().mat() * e.vectors;
  Mat pinched = Mat::Zero(sys.dim(), sys.dim());
  for (const auto& g : groups)
    for (int i : g)
      for (int j : g) pinched(i, j) = rho_tilde(i, j);
  NessResult out{DensityMatrix(Mat(e.vectors * pinched * e.vectors.adjoint())), {}};

  std::vector<double> energies;
  for (const auto& g : groups) {
    double mean = 0;
    for (int i : g) mean += e.values(i);
    energies.push_back(mean / g.size());
  }
  std::vector<double> gaps;
  for (size_t a = 0; a < energies.size(); ++a)
    for (size_t b = a + 1; b < energies.size(); ++b)
      gaps.push_back(energies[b] - energies[a]);
  std::sort(gaps.begin(), gaps.end());
  for (size_t k = 0; k + 1 < gaps.size(); ++k)
    if (gaps[k + 1] - gaps[k] < tolerances().bohr_warning)
      out.degenerate_gap_pairs.emplace_back(gaps[k], gaps[k + 1]);
  return out;
}

/// Quadrature realization of the Cesaro average (1/T) int_0^T nu_t dt,
/// composite trapezoid; the expensive but assumption-free oracle.
inline Mat cesaro_average_quadrature(const FiniteQuantumSystem& sys, double T,
                                     double dt) {
  int n = static_cast<int>(std::round(T / dt));
  Mat acc = Mat::Zero(sys.dim(), sys.dim());
  for (int k = 0; k <= n; ++k) {
    double w = (k == 0 || k == n) ? 0.5 : 1.0;
    Mat u = sys.propagator(k * dt);
    acc += w * (u * sys.omega().mat() * u.adjoint());
  }
  return acc / n;
}

/// Time reversal in the construction basis: entrywise complex conjugation.
inline Mat time_reversal(const FiniteQuantumSystem& sys, const Mat& a) {
  if (!sys.is_tri())
    throw Error("time_reversal: system not declared time-reversal invariant");
  return a.conjugate();
}

inline bool is_tri(const FiniteQuantumSystem& sys) { return sys.is_tri(); }

}  // namespace qef
