#pragma once

// Entropy-production statistics: the two-time-measurement law, the ancilla
// and phase-space-contraction functionals, literal ancilla tomography,
// fluctuation-relation checks, sandwich bounds, and the Gartner-Ellis /
// Legendre large-deviation toolkit.

#include "qef/linalg.hpp"
#include "qef/modular.hpp"
#include "qef/system.hpp"

#include <limits>
#include <map>

namespace qef {

// ---------------------------------------------------------------------------
// Finitely supported probability measures on R
// ---------------------------------------------------------------------------
class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  /// Atoms are sorted and merged on the s axis; tiny negative weights from
  /// roundoff are clipped to zero and the total mass renormalized. The size
  /// of the largest clip is retained for reporting.
  explicit AtomicMeasure(std::vector<std::pair<double, double>> raw) {
    std::sort(raw.begin(), raw.end());
    const double merge = tolerances().atom_merge;
    for (const auto& [s, p] : raw) {
      if (!atoms_.empty() && s - atoms_.back().first <= merge)
        atoms_.back().second += p;
      else
        atoms_.emplace_back(s, p);
    }
    double mass = 0.0;
    for (auto& [s, p] : atoms_) {
      if (p < 0.0) {
        if (p < -1e-12) throw Error("AtomicMeasure: negative weight beyond clip range");
        clip_magnitude_ = std::max(clip_magnitude_, -p);
        p = 0.0;
      }
      mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-10)
      throw Error("AtomicMeasure: mass differs from 1 beyond tolerance");
    for (auto& [s, p] : atoms_) p /= mass;
  }

  const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
  double clip_magnitude() const { return clip_magnitude_; }

  double mass() const {
    double m = 0;
    for (auto& [s, p] : atoms_) m += p;
    return m;
  }

  double mean() const {
    double m = 0;
    for (auto& [s, p] : atoms_) m += s * p;
    return m;
  }

  /// Laplace transform  sum_s e^{-alpha s} p(s).
  Complex laplace(Complex alpha) const {
    Complex acc = 0;
    for (auto& [s, p] : atoms_) acc += std::exp(-alpha * s) * p;
    return acc;
  }

  /// Law of -s.
  AtomicMeasure reflected() const {
    std::vector<std::pair<double, double>> r;
    for (auto& [s, p] : atoms_) r.emplace_back(-s, p);
    return AtomicMeasure(std::move(r));
  }

 private:
  std::vector<std::pair<double, double>> atoms_;
  double clip_magnitude_ = 0.0;
};

/// A sampled entropic functional over an alpha grid, tagged by which of the
/// three functionals it came from; the carrier of CSV emission.
struct FunctionalGrid {
  enum class Kind { TwoTime, Ancilla, Qpsc };
  Kind kind;
  double t;
  std::string state;  // descriptor of nu
  std::vector<Complex> alphas;
  std::vector<Complex> values;

  /// Checks lengths and, for the two-time kind, normalization at alpha = 0.
  void validate() const {
    if (alphas.size() != values.size())
      throw Error("FunctionalGrid: alpha/value length mismatch");
    if (kind != Kind::TwoTime) return;
    for (size_t i = 0; i < alphas.size(); ++i)
      if (std::abs(alphas[i]) < 1e-15 && std::abs(values[i] - 1.0) > 1e-10)
        throw Error("FunctionalGrid: two-time functional not normalized at alpha=0");
  }
};

// ---------------------------------------------------------------------------
// Two-time measurement of the entropy observable S = -log omega
// ---------------------------------------------------------------------------

/// Law of the increment s_f - s_i for a measurement of S at time 0 (state nu),
/// evolution for time t, and a second measurement of S.
inline AtomicMeasure two_time_measure(const FiniteQuantumSystem& sys, const Mat& nu,
                                      double t) {
  const DensityMatrix& omega = sys.omega();
  auto groups = group_close(omega.eigenvalues(), tolerances().eig_grouping);
  const Mat& u = omega.eigenvectors();

  std::vector<double> svals;  // one entropy value per spectral group
  for (const auto& g : groups) {
    double lam = 0;
    for (int i : g) lam += omega.eigenvalues()(i);
    svals.push_back(-std::log(lam / g.size()));
  }

  Mat nut = u.adjoint() * nu * u;
  Mat k = u.adjoint() * sys.propagator(t) * u;  // e^{-itH} in the omega basis

  std::vector<std::pair<double, double>> raw;
  const int ng = static_cast<int>(groups.size());
  for (int i = 0; i < ng; ++i) {
    // nu restricted to block i
    Mat nui = Mat::Zero(groups[i].size(), groups[i].size());
    for (size_t a = 0; a < groups[i].size(); ++a)
      for (size_t b = 0; b < groups[i].size(); ++b)
        nui(a, b) = nut(groups[i][a], groups[i][b]);
    for (int f = 0; f < ng; ++f) {
      Mat kf(groups[f].size(), groups[i].size());
      for (size_t a = 0; a < groups[f].size(); ++a)
        for (size_t b = 0; b < groups[i].size(); ++b)
          kf(a, b) = k(groups[f][a], groups[i][b]);
      double p = (kf * nui * kf.adjoint()).trace().real();
      raw.emplace_back(svals[f] - svals[i], p);
    }
  }
  return AtomicMeasure(std::move(raw));
}

// ---------------------------------------------------------------------------
// The three entropic functionals
// ---------------------------------------------------------------------------

/// F^2tm_{nu,t}(alpha) = tr(pinch(nu) omega^{-a/2} omega_{-t}^a omega^{-a/2}),
/// the closed form of the Cesaro-averaged two-time-measurement transform.
inline Complex f2tm(const FiniteQuantumSystem& sys, const Mat& nu, double t,
                    Complex alpha) {
  const DensityMatrix& w = sys.omega();
  Mat core = w.power(-alpha / 2.0) * sys.omega_minus_t_power(t, alpha) *
             w.power(-alpha / 2.0);
  return (pinch(nu, w) * core).trace();
}

/// F^ancilla_{nu,t}(alpha) = tr(nu omega^{-a/2} omega_{-t}^a omega^{-a/2}).
inline Complex f_ancilla(const FiniteQuantumSystem& sys, const Mat& nu, double t,
                         Complex alpha) {
  const DensityMatrix& w = sys.omega();
  Mat core = w.power(-alpha / 2.0) * sys.omega_minus_t_power(t, alpha) *
             w.power(-alpha / 2.0);
  return (nu * core).trace();
}

/// F^qpsc_{nu,t}(alpha) = tr(nu omega_{-t}^a omega^{-a}) = nu([D omega_{-t} : D omega]_a).
inline Complex f_qpsc(const FiniteQuantumSystem& sys, const Mat& nu, double t,
                      Complex alpha) {
  return (nu * sys.omega_minus_t_power(t, alpha) * sys.omega().power(-alpha)).trace();
}

// ---------------------------------------------------------------------------
// Literal ancilla tomography
// ---------------------------------------------------------------------------

struct AncillaResult {
  Mat rho_t;                    // 2x2 ancilla state after evolution
  Complex f_estimate;           // (rho_t)_{+-} / rho_{+-}
  double diag_residual;         // max deviation of the preserved diagonal
  double dressing_residual;     // H_alpha vs H + W-dressing decomposition
  double evolution_residual;    // e^{-it(H+W_a)} = e^{-itH} [D omega_{-t}:D omega]_{a/2}
};

/// Couples the system to a qubit through the dressed Hamiltonian
///   H_alpha = e^{(a/2) log omega x sigma_z} (H x 1) e^{-(a/2) log omega x sigma_z},
/// evolves nu x rho, traces out the system and reads the functional off the
/// decay of the ancilla coherence. Purely imaginary alpha only.
inline AncillaResult ancilla_simulate(const OpenQuantumSystem& open, const Mat& nu,
                                      const Mat& rho, Complex alpha, double t) {
  if (std::abs(alpha.real()) > 1e-14)
    throw Error("ancilla_simulate: alpha must be purely imaginary");
  if (std::abs(rho(0, 1)) < 1e-14)
    throw Error("ancilla_simulate: ancilla state commutes with sigma_z: no tomographic signal");
  const FiniteQuantumSystem& sys = open.sys();
  const int d = sys.dim();

  Mat sz(2, 2);
  sz << 1, 0, 0, -1;
  Mat gen = kron(sys.omega().log(), sz);
  Mat g = expm(gen, alpha / 2.0);
  Mat ginv = expm(gen, -alpha / 2.0);
  Mat h_alpha = g * kron(sys.H(), Mat::Identity(2, 2)) * ginv;

  Mat state = kron(nu, rho);
  Mat u = expm(h_alpha, Complex(0, -t));
  Mat evolved = u * state * expm(h_alpha, Complex(0, t));
  Mat rho_t = partial_trace(evolved, d, 2, TraceSide::First);

  AncillaResult out;
  out.rho_t = rho_t;
  out.f_estimate = rho_t(0, 1) / rho(0, 1);
  out.diag_residual = std::max(std::abs(rho_t(0, 0) - rho(0, 0)),
                               std::abs(rho_t(1, 1) - rho(1, 1)));

  // dressing decomposition H_alpha = H x 1 + W_a x P_+ + W_{-a} x P_-
  auto w_of = [&](Complex a) {
    return Mat(analytic_flow(sys.omega(), a / 2.0, open.V()) - open.V());
  };
  Mat p_plus = (Mat::Identity(2, 2) + sz) / 2.0;
  Mat p_minus = (Mat::Identity(2, 2) - sz) / 2.0;
  Mat what = kron(w_of(alpha), p_plus) + kron(w_of(-alpha), p_minus);
  out.dressing_residual = max_abs(h_alpha - kron(sys.H(), Mat::Identity(2, 2)) - what);

  // evolution identity at the algebra level
  Mat lhs = expm(Mat(sys.H() + w_of(alpha)), Complex(0, -t));
  Mat rhs = sys.propagator(t) * connes_cocycle_t(sys, -t, alpha / 2.0);
  out.evolution_residual = max_abs(lhs - rhs);
  return out;
}

// ---------------------------------------------------------------------------
// Finite-time fluctuation relations
// ---------------------------------------------------------------------------

/// max_alpha |F^2tm_{omega,t}(alpha) - conj(F^2tm_{omega,t}(1 - conj(alpha)))|
/// over a grid in the closed strip 0 <= Re alpha <= 1.
inline double es_symmetry_residual(const FiniteQuantumSystem& sys, double t,
                                   const std::vector<Complex>& alpha_grid) {
  double worst = 0;
  for (Complex a : alpha_grid) {
    Complex lhs = f2tm(sys, sys.omega().mat(), t, a);
    Complex rhs = std::conj(f2tm(sys, sys.omega().mat(), t, 1.0 - std::conj(a)));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

/// Pairs atoms of Q_{omega,t} at s and -s and returns
/// max |log(p(-s)/p(s)) + s| over atoms with mass above 1e-12.
inline double measure_reflection_check(const FiniteQuantumSystem& sys, double t) {
  AtomicMeasure q = two_time_measure(sys, sys.omega().mat(), t);
  const auto& atoms = q.atoms();
  double worst = 0;
  for (const auto& [s, p] : atoms) {
    if (p <= 1e-12) continue;
    double pm = -1;
    for (const auto& [s2, p2] : atoms)
      if (std::abs(s2 + s) <= 1e-9) {
        pm = p2;
        break;
      }
    if (pm < 0) throw Error("measure_reflection_check: missing mirror atom");
    worst = std::max(worst, std::abs(std::log(pm / p) + s));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Sandwich bounds
// ---------------------------------------------------------------------------

struct SandwichReport {
  double C_T, D_T;
  double f2tm_ref;        // F^2tm_{omega,t}(alpha)
  double f_ancilla_T;     // F^ancilla_{omega_T,t}(alpha)
  double f2tm_T;          // F^2tm_{omega_T,t}(alpha)
  double slack_min;       // most violated inequality margin (>= 0 means all hold)
  bool ok;
};

inline double operator_norm(const Mat& m) {
  return m.jacobiSvd().singularValues()(0);
}

/// Both chains of inequalities
///   D_T F^2tm_{omega,t} <= F^ancilla_{omega_T,t} <= C_T F^2tm_{omega,t}
///   D_T F^2tm_{omega,t} <= F^2tm_{omega_T,t}    <= C_T F^2tm_{omega,t}
/// with C_T, D_T from the operator norms of the half-line analytic flows of V.
inline SandwichReport sandwich_bounds_check(const OpenQuantumSystem& open, double T,
                                            double t, double alpha,
                                            double slack_tol = 1e-10) {
  const FiniteQuantumSystem& sys = open.sys();
  double n_minus = operator_norm(analytic_flow(sys.omega(), 0.5, open.V()));
  double n_plus = operator_norm(analytic_flow(sys.omega(), -0.5, open.V()));
  double nv = operator_norm(open.V());
  SandwichReport r{};
  r.C_T = std::exp(2.0 * std::abs(T) * (n_minus + nv));
  r.D_T = std::exp(-2.0 * std::abs(T) * (n_plus + nv));

  Mat omega_T = sys.evolve(sys.omega(), T).mat();
  Complex a(alpha, 0);
  Complex v2 = f2tm(sys, sys.omega().mat(), t, a);
  Complex va = f_ancilla(sys, omega_T, t, a);
  Complex vT = f2tm(sys, omega_T, t, a);
  if (std::abs(v2.imag()) > 1e-9 || v2.real() <= 0 || std::abs(va.imag()) > 1e-9 ||
      va.real() <= 0 || std::abs(vT.imag()) > 1e-9 || vT.real() <= 0)
    throw Error("sandwich_bounds_check: functionals not real positive at real alpha");
  r.f2tm_ref = v2.real();
  r.f_ancilla_T = va.real();
  r.f2tm_T = vT.real();

  double slack = std::numeric_limits<double>::infinity();
  slack = std::min(slack, r.C_T * r.f2tm_ref - r.f_ancilla_T);
  slack = std::min(slack, r.f_ancilla_T - r.D_T * r.f2tm_ref);
  slack = std::min(slack, r.C_T * r.f2tm_ref - r.f2tm_T);
  slack = std::min(slack, r.f2tm_T - r.D_T * r.f2tm_ref);
  r.slack_min = slack;
  r.ok = slack >= -slack_tol;
  return r;
}

// ---------------------------------------------------------------------------
// Gartner-Ellis estimation and Legendre transform
// ---------------------------------------------------------------------------

struct GartnerEllisResult {
  double rate;             // least-squares slope of log F_t over the top half
  double linear_residual;  // max |log F_t - fit|
  double oscillation;      // spread of the pointwise slopes log(F)/t
  bool converged;          // residual small enough to trust the limit
};

/// Fits F(alpha) = lim (1/t) log F_t from samples on an increasing t grid.
/// Finite quantum systems are quasi-periodic and never converge: this is
/// reported through the diagnostics, never asserted away.
inline GartnerEllisResult gartner_ellis(const std::vector<double>& t_grid,
                                        const std::vector<double>& f_samples,
                                        double residual_tol = 1e-6) {
  if (t_grid.size() != f_samples.size() || t_grid.size() < 8)
    throw Error("gartner_ellis: need at least 8 samples");
  std::vector<double> logs(t_grid.size());
  for (size_t i = 0; i < t_grid.size(); ++i) {
    if (f_samples[i] <= 0.0) throw Error("gartner_ellis: non-positive sample");
    logs[i] = std::log(f_samples[i]);
  }
  size_t lo = t_grid.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t n = t_grid.size() - lo;
  for (size_t i = lo; i < t_grid.size(); ++i) {
    sx += t_grid[i];
    sy += logs[i];
    sxx += t_grid[i] * t_grid[i];
    sxy += t_grid[i] * logs[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  double resid = 0;
  for (size_t i = lo; i < t_grid.size(); ++i)
    resid = std::max(resid, std::abs(logs[i] - slope * t_grid[i] - intercept));
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (size_t i = lo; i < t_grid.size(); ++i) {
    double point = logs[i] / t_grid[i];
    mn = std::min(mn, point);
    mx = std::max(mx, point);
  }
  return {slope, resid, mx - mn, resid <= residual_tol};
}

struct RateFunction {
  std::vector<double> s_grid;
  std::vector<double> values;  // I(s) >= 0
  double a = -std::numeric_limits<double>::infinity();  // domain endpoints
  double b = std::numeric_limits<double>::infinity();

  double discrete_convexity_residual() const {
    double worst = 0;
    for (size_t i = 1; i + 1 < values.size(); ++i)
      worst = std::max(worst, -(values[i + 1] - 2 * values[i] + values[i - 1]));
    return worst;
  }
};

/// Legendre transform I(s) = sup_{-alpha in (lo,hi)} (s alpha - F(-alpha)),
/// i.e. sup_{b in (lo,hi)} (-s b - F(b)), by grid search plus golden-section
/// refinement. Domain endpoints follow from one-sided slopes of F.
inline RateFunction legendre(const std::function<double(double)>& F, double lo,
                             double hi, const std::vector<double>& s_grid,
                             int coarse = 2001) {
  RateFunction out;
  out.s_grid = s_grid;
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  for (double s : s_grid) {
    auto g = [&](double b) { return -s * b - F(b); };
    double best = -std::numeric_limits<double>::infinity(), bestb = lo;
    for (int k = 0; k < coarse; ++k) {
      double b = lo + (hi - lo) * k / (coarse - 1);
      double v = g(b);
      if (v > best) {
        best = v;
        bestb = b;
      }
    }
    double step = (hi - lo) / (coarse - 1);
    double a0 = std::max(lo, bestb - step), b0 = std::min(hi, bestb + step);
    double x1 = a0 + golden * (b0 - a0), x2 = b0 - golden * (b0 - a0);
    double f1 = g(x1), f2 = g(x2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        a0 = x1;
        x1 = x2;
        f1 = f2;
        x2 = b0 - golden * (b0 - a0);
        f2 = g(x2);
      } else {
        b0 = x2;
        x2 = x1;
        f2 = f1;
        x1 = a0 + golden * (b0 - a0);
        f1 = g(x1);
      }
    }
    out.values.push_back(std::max(best, std::max(f1, f2)));
  }
  // exposed interval from one-sided slopes of F at the interval ends; for the
  // GC-symmetric entropic CGFs this equals the derivative-limit endpoints
  double h = 1e-6 * (hi - lo);
  double slope_lo = (F(lo + h) - F(lo)) / h;
  double slope_hi = (F(hi) - F(hi - h)) / h;
  out.a = -slope_hi;
  out.b = -slope_lo;
  if (out.a > out.b) std::swap(out.a, out.b);
  return out;
}

/// max_s |I(-s) - I(s) - s| over grid points paired within 1e-9.
inline double fluctuation_relation_residual(const RateFunction& rf) {
  double worst = 0;
  for (size_t i = 0; i < rf.s_grid.size(); ++i) {
    double s = rf.s_grid[i];
    for (size_t j = 0; j < rf.s_grid.size(); ++j) {
      if (std::abs(rf.s_grid[j] + s) > 1e-9) continue;
      if (!std::isfinite(rf.values[i]) || !std::isfinite(rf.values[j])) continue;
      worst = std::max(worst, std::abs(rf.values[j] - rf.values[i] - s));
    }
  }
  return worst;
}

}  // namespace qef
