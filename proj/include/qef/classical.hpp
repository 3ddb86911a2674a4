#pragma once

// Desk-scale classical counterpart: irreducible Markov models with symmetric
// transition support, entropy-production cocycles along paths, tilted transfer
// matrices, topological pressure as a Perron root, Evans-Searles and
// Gallavotti-Cohen relations, and the exact strong PREF (the pressure does not
// depend on the initial measure).

#include "qef/functionals.hpp"
#include "qef/linalg.hpp"
#include "qef/transfer.hpp"

#include <deque>

namespace qef {

class MarkovGibbsModel {
 public:
  MarkovGibbsModel(RMat p, RVec mu0) : p_(std::move(p)), mu0_(std::move(mu0)) {
    const int n = static_cast<int>(p_.rows());
    if (p_.cols() != n || mu0_.size() != n)
      throw Error("MarkovGibbsModel: dimension mismatch");
    for (int i = 0; i < n; ++i) {
      if (std::abs(p_.row(i).sum() - 1.0) > 1e-12)
        throw Error("MarkovGibbsModel: rows must sum to 1");
      for (int j = 0; j < n; ++j) {
        if (p_(i, j) < 0) throw Error("MarkovGibbsModel: negative entry");
        if ((p_(i, j) > 0) != (p_(j, i) > 0))
          throw Error("MarkovGibbsModel: transition support must be symmetric");
      }
      if (mu0_(i) <= 0) throw Error("MarkovGibbsModel: initial measure must be faithful");
    }
    if (std::abs(mu0_.sum() - 1.0) > 1e-12)
      throw Error("MarkovGibbsModel: initial measure must be normalized");
    check_irreducible();
    pi_ = compute_stationary();
  }

  int states() const { return static_cast<int>(p_.rows()); }
  const RMat& p() const { return p_; }
  const RVec& mu0() const { return mu0_; }
  const RVec& pi() const { return pi_; }

  MarkovGibbsModel with_initial(RVec mu0) const { return {p_, std::move(mu0)}; }
  MarkovGibbsModel at_stationarity() const { return with_initial(pi_); }

  /// Per-step increment g(x, y) = log(p(x,y) / p(y,x)).
  double increment(int x, int y) const {
    if (p_(x, y) <= 0) throw Error("MarkovGibbsModel: increment on forbidden transition");
    return std::log(p_(x, y) / p_(y, x));
  }

  /// Tilted matrix M_alpha(x,y) = p(x,y)^{1-alpha} p(y,x)^{alpha}.
  RMat tilted(double alpha) const {
    const int n = states();
    RMat m = RMat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (p_(i, j) > 0)
          m(i, j) = std::pow(p_(i, j), 1.0 - alpha) * std::pow(p_(j, i), alpha);
    return m;
  }

 private:
  void check_irreducible() const {
    const int n = states();
    std::vector<bool> seen(n, false);
    std::deque<int> queue{0};
    seen[0] = true;
    while (!queue.empty()) {
      int x = queue.front();
      queue.pop_front();
      for (int y = 0; y < n; ++y)
        if (p_(x, y) > 0 && !seen[y]) {
          seen[y] = true;
          queue.push_back(y);
        }
    }
    for (bool s : seen)
      if (!s) throw Error("MarkovGibbsModel: chain not irreducible");
  }

  RVec compute_stationary() const {
    const int n = states();
    // direct solve of pi (P - I) = 0 with the normalization row appended
    RMat a = RMat::Zero(n + 1, n);
    a.topRows(n) = p_.transpose() - RMat::Identity(n, n);
    a.row(n).setOnes();
    RVec rhs = RVec::Zero(n + 1);
    rhs(n) = 1.0;
    RVec pi = a.colPivHouseholderQr().solve(rhs);
    // power-iteration cross-check
    RVec q = RVec::Constant(n, 1.0 / n);
    for (int it = 0; it < 20000; ++it) {
      RVec next = p_.transpose() * q;
      next /= next.sum();
      if ((next - q).cwiseAbs().maxCoeff() < 1e-15) {
        q = next;
        break;
      }
      q = next;
    }
    if ((q - pi).cwiseAbs().maxCoeff() > 1e-12)
      throw Error("MarkovGibbsModel: stationary vector cross-check failed");
    for (int i = 0; i < n; ++i)
      if (pi(i) <= 0) throw Error("MarkovGibbsModel: stationary vector not positive");
    return pi;
  }

  RMat p_;
  RVec mu0_;
  RVec pi_;
};

inline RVec stationary(const MarkovGibbsModel& m) { return m.pi(); }

/// Exact finite-n cumulant generating rate
///   (1/n) log sum_paths mu0(x_0) prod p(x_k, x_{k+1}) e^{-alpha sum g},
/// by vector-matrix powering against the tilted matrix.
inline double path_cgf_exact(const MarkovGibbsModel& m, double alpha, int n_steps) {
  if (n_steps < 1) throw Error("path_cgf_exact: n_steps must be >= 1");
  RMat t = m.tilted(alpha);
  RVec u = m.mu0();
  for (int k = 0; k < n_steps; ++k) u = t.transpose() * u;
  return std::log(u.sum()) / n_steps;
}

/// Topological pressure e(alpha) = log rho(M_alpha) (Perron root).
inline double pressure(const MarkovGibbsModel& m, double alpha) {
  GeneralEig eig = general_eig(m.tilted(alpha).cast<Complex>(), false);
  double rho = 0;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k)
    rho = std::max(rho, std::abs(eig.values(k)));
  return std::log(rho);
}

/// Entropy production along a path at the reference measure mu0: the log of
/// the path density against its time reversal,
///   sum_k g(x_k, x_{k+1}) + log mu0(x_0) - log mu0(x_n).
/// The boundary weights realize the reversal-invariance of the reference
/// measure; at mu0 = pi the law of this cocycle obeys the e^{-s} symmetry
/// exactly at every finite n.
inline double classical_cocycle(const MarkovGibbsModel& m, const std::vector<int>& path) {
  if (path.size() < 2) throw Error("classical_cocycle: path too short");
  double s = std::log(m.mu0()(path.front())) - std::log(m.mu0()(path.back()));
  for (size_t k = 0; k + 1 < path.size(); ++k) s += m.increment(path[k], path[k + 1]);
  return s;
}

/// Plain increment sum along a path (no boundary weights); the variable whose
/// cumulants the tilted matrices generate.
inline double path_increment_sum(const MarkovGibbsModel& m, const std::vector<int>& path) {
  double s = 0;
  for (size_t k = 0; k + 1 < path.size(); ++k) s += m.increment(path[k], path[k + 1]);
  return s;
}

/// Law of the entropy-production cocycle over all n-step paths.
inline AtomicMeasure classical_cocycle_law(const MarkovGibbsModel& m, int n_steps) {
  if (n_steps < 1 || n_steps > 16) throw Error("classical_cocycle_law: n out of range");
  std::vector<std::pair<double, double>> raw;
  std::vector<int> path(n_steps + 1);
  std::function<void(int, double, double)> walk = [&](int depth, double weight,
                                                      double gsum) {
    if (depth == n_steps) {
      double s = gsum + std::log(m.mu0()(path[0])) - std::log(m.mu0()(path[depth]));
      raw.emplace_back(s, weight);
      return;
    }
    int x = path[depth];
    for (int y = 0; y < m.states(); ++y) {
      if (m.p()(x, y) <= 0) continue;
      path[depth + 1] = y;
      walk(depth + 1, weight * m.p()(x, y), gsum + m.increment(x, y));
    }
  };
  for (int x0 = 0; x0 < m.states(); ++x0) {
    path[0] = x0;
    walk(0, m.mu0()(x0), 0.0);
  }
  return AtomicMeasure(std::move(raw));
}

/// Exact finite-n Evans-Searles reflection residual at stationarity:
/// max over atoms of |log(p(-s)/p(s)) + s|.
inline double evans_searles_check(const MarkovGibbsModel& m, int n_steps) {
  if ((m.mu0() - m.pi()).cwiseAbs().maxCoeff() > 1e-10)
    throw Error("evans_searles_check: symmetry asserted only at the stationary measure");
  AtomicMeasure q = classical_cocycle_law(m, n_steps);
  double worst = 0;
  for (const auto& [s, p] : q.atoms()) {
    if (p <= 1e-12) continue;
    double pm = -1;
    for (const auto& [s2, p2] : q.atoms())
      if (std::abs(s2 + s) <= 1e-9) {
        pm = p2;
        break;
      }
    if (pm < 0) throw Error("evans_searles_check: missing mirror atom");
    worst = std::max(worst, std::abs(std::log(pm / p) + s));
  }
  return worst;
}

/// Rate function of the entropy production per step: Legendre transform of
/// the pressure, inheriting the Gallavotti-Cohen symmetry from e(a) = e(1-a).
inline RateFunction classical_rate_function(const MarkovGibbsModel& m,
                                            const std::vector<double>& s_grid,
                                            double alpha_lo = -2.0,
                                            double alpha_hi = 3.0) {
  auto F = [&](double a) { return pressure(m, a); };
  return legendre(F, alpha_lo, alpha_hi, s_grid);
}

struct ClassicalSpectrumPoint {
  double alpha;
  double log_perron;     // direct Perron oracle log rho(M_alpha)
  Complex resonance;     // E(alpha) from the transfer-operator machinery
  bool ok;
  std::string error;
};

/// Feeds the tilted matrices through the resonance machinery using the
/// dictionary M^n = e^{-i t L} at L = i log M: the dominant pole is then
/// i log rho(M_alpha). Cross-reported against the direct Perron root.
inline std::vector<ClassicalSpectrumPoint> classical_transfer_spectrum(
    const MarkovGibbsModel& m, const std::vector<double>& alpha_grid) {
  const int n = m.states();
  Vec phi(n), psi(n);
  for (int i = 0; i < n; ++i) {
    phi(i) = m.mu0()(i);
    psi(i) = 1.0;
  }
  std::vector<ClassicalSpectrumPoint> out;
  for (double a : alpha_grid) {
    ClassicalSpectrumPoint pt{a, pressure(m, a), Complex(0, 0), false, ""};
    try {
      Mat gen = kI * logm_eig(m.tilted(a).cast<Complex>());
      ResonanceResult r = dominant_pole(gen, phi, psi);
      pt.resonance = r.pole;
      pt.ok = true;
    } catch (const Error& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace qef
