#pragma once

// Quantum transfer operators: the standard, alpha- and hat-Liouvilleans as
// superoperators on the GNS space, Liouvillean representations of the entropic
// functionals, resolvent and dominant-pole extraction, the spectral route to
// the NESS, and resonance curves over alpha grids.
//
// Conventions: vec stacks columns, so a sandwich X -> A X B densifies to
// kron(B^T, A). The standard Liouvillean acts as vec(X) -> vec(HX - XH) and is
// Hermitian; e^{-itL} Omega is the cone representative of omega_t.

#include "qef/functionals.hpp"
#include "qef/linalg.hpp"
#include "qef/modular.hpp"
#include "qef/superop.hpp"
#include "qef/system.hpp"

namespace qef {

enum class LiouvTag { Standard, Alpha, Hat };

struct AlphaLiouvillean {
  Complex alpha;
  SuperOperator op;
  LiouvTag tag;

  Mat dense() const { return op.dense(); }
  Vec apply(const Vec& v) const { return op.apply_vec(v); }
};

/// L : vec(X) -> vec(HX - XH).
inline AlphaLiouvillean standard_liouvillean(const FiniteQuantumSystem& sys) {
  return {Complex(0, 0), SuperOperator::commutator(sys.H()), LiouvTag::Standard};
}

/// L_alpha : vec(X) -> vec(H_fr X - X H_fr + V X - X omega^{-a} V omega^{a}).
inline AlphaLiouvillean alpha_liouvillean(const OpenQuantumSystem& open, Complex alpha) {
  const FiniteQuantumSystem& sys = open.sys();
  SuperOperator s = SuperOperator::commutator(open.H_fr());
  s.add(open.V(), Mat::Identity(sys.dim(), sys.dim()));
  Mat dressed = analytic_flow(sys.omega(), -alpha, open.V());
  s.add(-Mat::Identity(sys.dim(), sys.dim()), dressed);
  return {alpha, std::move(s), LiouvTag::Alpha};
}

/// hat L_alpha : vec(X) -> vec(H_fr X - X H_fr
///                  + omega^{-a/2} V omega^{a/2} X - X omega^{-(1-a)/2} V omega^{(1-a)/2}).
inline AlphaLiouvillean hat_liouvillean(const OpenQuantumSystem& open, Complex alpha) {
  const FiniteQuantumSystem& sys = open.sys();
  SuperOperator s = SuperOperator::commutator(open.H_fr());
  s.add(analytic_flow(sys.omega(), -alpha / 2.0, open.V()),
        Mat::Identity(sys.dim(), sys.dim()));
  Mat right = analytic_flow(sys.omega(), -(1.0 - alpha) / 2.0, open.V());
  s.add(-Mat::Identity(sys.dim(), sys.dim()), right);
  return {alpha, std::move(s), LiouvTag::Hat};
}

// ---------------------------------------------------------------------------
// Liouvillean representations of the entropic functionals
// ---------------------------------------------------------------------------

/// <Omega, e^{itL_{1/2-alpha}} Omega>.
inline Complex rep_2tm(const OpenQuantumSystem& open, double t, Complex alpha) {
  GnsSpace gns(open.omega());
  AlphaLiouvillean l = alpha_liouvillean(open, 0.5 - alpha);
  Vec v = expm_apply_vec(l.op, Complex(0, t), gns.Omega());
  return gns.Omega().dot(v);
}

/// <Omega, e^{iTL_{1/2}} e^{itL_{1/2-alpha}} Omega>.
inline Complex rep_qpsc(const OpenQuantumSystem& open, double T, double t,
                        Complex alpha) {
  GnsSpace gns(open.omega());
  Vec v = expm_apply_vec(alpha_liouvillean(open, 0.5 - alpha).op, Complex(0, t),
                         gns.Omega());
  v = expm_apply_vec(alpha_liouvillean(open, 0.5).op, Complex(0, T), v);
  return gns.Omega().dot(v);
}

/// <Omega, e^{iTL_{1/2}} e^{it hatL_alpha} Omega>.
inline Complex rep_ancilla(const OpenQuantumSystem& open, double T, double t,
                           Complex alpha) {
  GnsSpace gns(open.omega());
  Vec v = expm_apply_vec(hat_liouvillean(open, alpha).op, Complex(0, t), gns.Omega());
  v = expm_apply_vec(alpha_liouvillean(open, 0.5).op, Complex(0, T), v);
  return gns.Omega().dot(v);
}

/// Residual of the vector identity e^{itL_{1/2-alpha}} Omega = [D omega_{-t} : D omega]_alpha Omega.
inline double cocycle_vector_residual(const OpenQuantumSystem& open, double t,
                                      Complex alpha) {
  GnsSpace gns(open.omega());
  Vec lhs = expm_apply_vec(alpha_liouvillean(open, 0.5 - alpha).op, Complex(0, t),
                           gns.Omega());
  Vec rhs = gns.pi(connes_cocycle_t(open.sys(), -t, alpha)).apply_vec(gns.Omega());
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Resolvents and dominant poles
// ---------------------------------------------------------------------------

/// f(z) = <phi, (z - L)^{-1} psi> by dense LU solve with a residual guard.
inline Complex resolvent_element(const Mat& l, const Vec& phi, const Vec& psi,
                                 Complex z) {
  const Eigen::Index n = l.rows();
  Mat a = z * Mat::Identity(n, n) - l;
  Eigen::PartialPivLU<Mat> lu(a);
  Vec x = lu.solve(psi);
  double resid = (a * x - psi).norm();
  if (!x.allFinite() || resid > 1e-10 * std::max(1.0, psi.norm()))
    throw Error("resolvent_element: resolvent evaluated at spectrum");
  return phi.dot(x);
}

struct ResonanceResult {
  Complex pole;              // the resonance
  int order = 1;             // pole order N (Jordan size of the cluster)
  Complex residue;           // <phi, P psi> = p(0)
  Complex overlap_left;      // <phi, v> for the dominant right eigenvector
  Complex overlap_right;     // <w, psi> for the matching left eigenvector
  double gap = 0;            // Im(dominant) - Im(runner-up), among visible poles
  std::vector<Complex> poly; // p(t) = sum_k poly[k] t^k
};

namespace detail {

/// Riesz projection onto the eigenvalue cluster around `center` by a circular
/// contour of the given radius; exact for analytic integrands, exponentially
/// convergent in the node count.
inline Mat riesz_projection(const Mat& l, Complex center, double radius,
                            int nodes = 64) {
  const Eigen::Index n = l.rows();
  Mat acc = Mat::Zero(n, n);
  for (int k = 0; k < nodes; ++k) {
    double th = 2.0 * M_PI * (k + 0.5) / nodes;
    Complex zr = radius * std::exp(Complex(0, th));
    Mat a = (center + zr) * Mat::Identity(n, n) - l;
    acc += zr * a.partialPivLu().solve(Mat::Identity(n, n));
  }
  return acc / static_cast<double>(nodes);
}

}  // namespace detail

/// Dominant resonance of <phi, e^{-itL} psi>: among eigenvalue clusters with
/// spectral-projection overlap above threshold, the one maximizing Im(lambda).
/// The cluster's Riesz projection supplies residue, Jordan order and the
/// polynomial prefactor.
inline ResonanceResult dominant_pole(const Mat& l, const Vec& phi, const Vec& psi) {
  GeneralEig eig = general_eig(l, true);
  const int n = static_cast<int>(l.rows());
  const double scale = std::max(1.0, max_abs(l));

  // cluster eigenvalues
  std::vector<int> order_idx(n);
  for (int i = 0; i < n; ++i) order_idx[i] = i;
  std::sort(order_idx.begin(), order_idx.end(), [&](int a, int b) {
    if (eig.values(a).real() != eig.values(b).real())
      return eig.values(a).real() < eig.values(b).real();
    return eig.values(a).imag() < eig.values(b).imag();
  });
  std::vector<std::vector<int>> clusters;
  const double ctol = 1e-8 * scale;
  for (int idx : order_idx) {
    if (!clusters.empty() &&
        std::abs(eig.values(idx) - eig.values(clusters.back().back())) <= ctol)
      clusters.back().push_back(idx);
    else
      clusters.push_back({idx});
  }

  struct Candidate {
    Complex lambda;
    Complex overlap;
    int cluster;
  };
  std::vector<Candidate> visible;
  for (size_t c = 0; c < clusters.size(); ++c) {
    Complex lam = 0, ov = 0;
    for (int idx : clusters[c]) {
      lam += eig.values(idx);
      ov += phi.dot(eig.right.col(idx)) * (eig.left.row(idx) * psi)(0);
    }
    lam /= static_cast<double>(clusters[c].size());
    if (std::abs(ov) > tolerances().overlap_threshold)
      visible.push_back({lam, ov, static_cast<int>(c)});
  }
  if (visible.empty())
    throw Error("dominant_pole: vectors orthogonal to all spectral subspaces");

  std::sort(visible.begin(), visible.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.lambda.imag() > b.lambda.imag();
            });
  if (visible.size() > 1 &&
      visible[1].lambda.imag() > visible[0].lambda.imag() - 1e-10 * scale)
    throw Error("dominant_pole: non-simple dominant resonance");

  const Candidate& top = visible[0];
  // contour radius: half-way to the nearest foreign eigenvalue
  double nearest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    bool in_cluster = false;
    for (int idx : clusters[top.cluster]) in_cluster |= (idx == i);
    if (!in_cluster) nearest = std::min(nearest, std::abs(eig.values(i) - top.lambda));
  }
  double radius = std::isfinite(nearest) ? nearest / 2.0 : std::max(1.0, 0.1 * scale);
  Mat proj = detail::riesz_projection(l, top.lambda, radius);

  ResonanceResult out;
  out.pole = top.lambda;
  out.residue = phi.dot(proj * psi);
  {
    int lead = clusters[top.cluster][0];
    out.overlap_left = phi.dot(eig.right.col(lead));
    out.overlap_right = (eig.left.row(lead) * psi)(0);
  }
  // spectral gap below the dominant resonance, over all foreign clusters
  double runner = -std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < clusters.size(); ++c) {
    if (static_cast<int>(c) == top.cluster) continue;
    for (int idx : clusters[c]) runner = std::max(runner, eig.values(idx).imag());
  }
  out.gap = std::isfinite(runner) ? top.lambda.imag() - runner
                                  : std::numeric_limits<double>::infinity();

  // Jordan order from the nilpotent part of the restriction
  Mat nil = (l - top.lambda * Mat::Identity(n, n)) * proj;
  Mat power = proj;
  int order = static_cast<int>(clusters[top.cluster].size());
  out.poly.assign(1, out.residue);
  for (int k = 1; k <= order; ++k) {
    power = nil * power;
    if (max_abs(power) <= tolerances().jordan_rank * std::max(1.0, scale)) {
      out.order = k;
      break;
    }
    // p(t) += (-it)^k / k!  <phi, nil^k psi>
    Complex coeff = std::pow(Complex(0, -1), k) * phi.dot(power * psi);
    for (int j = 2; j <= k; ++j) coeff /= j;
    out.poly.push_back(coeff);
    out.order = k + 1;
  }
  return out;
}

/// Evaluates max_t |<phi, e^{-itL} psi> - e^{-it r} p(t)| * e^{+decay t} over
/// the grid, where decay = -Im(subdominant) = gap - Im(pole); the fitted
/// constant K of the exponential error bound.
inline double asymptotic_residual(const Mat& l, const Vec& phi, const Vec& psi,
                                  const ResonanceResult& res,
                                  const std::vector<double>& t_grid) {
  double decay = std::isfinite(res.gap) ? res.gap - res.pole.imag() : 0.0;
  double worst = 0;
  for (double t : t_grid) {
    Mat u = expm(l, Complex(0, -t));
    Complex exact = phi.dot(u * psi);
    Complex p = 0;
    double tp = 1;
    for (size_t k = 0; k < res.poly.size(); ++k) {
      p += res.poly[k] * tp;
      tp *= t;
    }
    Complex model = std::exp(Complex(0, -t) * res.pole) * p;
    worst = std::max(worst, std::abs(exact - model) * std::exp(decay * t));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Spectral NESS
// ---------------------------------------------------------------------------

/// omega_+(A) = <Omega, R_{1/2} A Omega> with R_{1/2} the spectral projection
/// of L_{1/2} onto its kernel, realized as a resolvent contour integral. The
/// contour radius comes from the smallest nonzero Bohr frequency of H (the
/// spectrum of every L_alpha consists of Bohr frequencies). Errors out if 0
/// fails to be a semisimple eigenvalue or the projection degenerates.
inline Complex ness_via_spectral_projection(const OpenQuantumSystem& open,
                                            const Mat& a) {
  const int d = open.dim();
  if (d * d > tolerances().dense_dim_cap)
    throw Error("ness_via_spectral_projection: dimension cap exceeded");
  GnsSpace gns(open.omega());
  Mat l_half = alpha_liouvillean(open, 0.5).dense();
  const double scale = std::max(1.0, max_abs(l_half));

  auto groups = group_close(open.sys().h_eig().values, tolerances().eig_grouping);
  std::vector<double> energies;
  for (const auto& g : groups) {
    double m = 0;
    for (int i : g) m += open.sys().h_eig().values(i);
    energies.push_back(m / g.size());
  }
  double smallest_nonzero = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < energies.size(); ++i)
    for (size_t j = i + 1; j < energies.size(); ++j)
      smallest_nonzero = std::min(smallest_nonzero, energies[j] - energies[i]);
  if (!std::isfinite(smallest_nonzero) || smallest_nonzero < 1e-6 * scale)
    throw Error("ness_via_spectral_projection: kernel not separated from spectrum");

  Mat proj = detail::riesz_projection(l_half, Complex(0, 0), smallest_nonzero / 2.0, 32);
  if (max_abs(proj * proj - proj) > 1e-8)
    throw Error("ness_via_spectral_projection: contour projection degenerate");
  if (max_abs(l_half * proj) > 1e-8 * scale)
    throw Error("ness_via_spectral_projection: 0 is not a semisimple eigenvalue");

  Vec target = gns.pi(a).apply_vec(gns.Omega());
  return gns.Omega().dot(proj * target);
}

// ---------------------------------------------------------------------------
// Resonance curves
// ---------------------------------------------------------------------------

struct ResonancePoint {
  Complex alpha;
  ResonanceResult result;
  bool ok = false;
  std::string error;
};

/// E(alpha) extracted from dominant_pole over an alpha grid for a caller-
/// supplied generator family (quantum: -L_alpha dense; classical adapter:
/// i log M_alpha).
inline std::vector<ResonancePoint> resonance_curve(
    const std::function<Mat(Complex)>& family, const std::vector<Complex>& alphas,
    const Vec& phi, const Vec& psi) {
  std::vector<ResonancePoint> out;
  for (Complex a : alphas) {
    ResonancePoint pt;
    pt.alpha = a;
    try {
      pt.result = dominant_pole(family(a), phi, psi);
      pt.ok = true;
    } catch (const Error& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace qef
