#pragma once

// Dense complex linear-algebra substrate: Hermitian/general eigendecompositions,
// matrix functions of positive-definite operators, Kronecker products,
// vectorization and partial traces. Everything is double precision, everything
// is a value type backed by Eigen.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qef {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical tolerances used across the library. All checks reference this
/// single instance so that they can be tightened or relaxed in one place
/// (the CLI exposes them as --tolerance KEY=VAL).
struct Tolerances {
  double hermiticity = 1e-12;        // relative, ||A - A^dag||_max
  double faithfulness_floor = 1e-12; // smallest admissible eigenvalue of a state
  double trace_check = 1e-9;         // |tr(rho) - 1| on input states
  double eig_grouping = 1e-10;       // absolute, eigenvalue clustering
  double atom_merge = 1e-10;         // merging of measure atoms on the s axis
  double bohr_warning = 1e-8;        // near-degenerate Bohr frequency pairs
  double overlap_threshold = 1e-12;  // spectral-projection overlaps
  double jordan_rank = 1e-8;         // nilpotency detection
  double expm_overflow = 300.0;      // reject exp(scale*M) beyond this norm
  int dense_dim_cap = 4096;          // largest superoperator densified (d^2)
};

inline Tolerances& tolerances() {
  static Tolerances t;
  return t;
}

inline double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }
inline double max_imag(const Mat& m) { return m.imag().cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Mat& a, double rel_tol) {
  return max_abs(a - a.adjoint()) <= rel_tol * (1.0 + max_abs(a));
}

// ---------------------------------------------------------------------------
// Deterministic seeded randomness. mt19937_64 output is fully specified by the
// standard, so fixed seeds reproduce bit-identical matrices on any platform.
// Distribution objects are avoided on purpose (their algorithms are not).
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  RMat real_matrix(int rows, int cols, double lo = -1.0, double hi = 1.0) {
    RMat m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    return m;
  }

  /// Random real symmetric matrix with entries in [-1, 1].
  Mat real_symmetric(int d) {
    RMat m = real_matrix(d, d);
    return ((m + m.transpose()) / 2.0).cast<Complex>();
  }

  /// Random complex Hermitian matrix.
  Mat hermitian(int d) {
    Mat m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = Complex(uniform(-1, 1), uniform(-1, 1));
    return (m + m.adjoint()) / 2.0;
  }

  /// Random faithful density matrix (complex unless real_only).
  Mat density(int d, bool real_only = false) {
    Mat g = real_only ? Mat(real_matrix(d, d).cast<Complex>()) : hermitian(d);
    Mat rho = g * g.adjoint() + 0.05 * Mat::Identity(d, d);
    rho /= rho.trace();
    return rho;
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition
// ---------------------------------------------------------------------------
struct HermEig {
  RVec values;  // ascending
  Mat vectors;  // unitary, columns are eigenvectors
};

inline HermEig herm_eig(const Mat& a) {
  if (a.rows() != a.cols()) throw Error("herm_eig: matrix not square");
  Eigen::SelfAdjointEigenSolver<Mat> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error("herm_eig: eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// f(A) for Hermitian A through its spectral decomposition.
template <typename F>
Mat herm_fn(const Mat& a, F&& f) {
  HermEig e = herm_eig(a);
  Vec fd(e.values.size());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) fd(k) = f(e.values(k));
  return e.vectors * fd.asDiagonal() * e.vectors.adjoint();
}

enum class MatrixFn { Exp, Log, Power };

/// Matrix function of a positive-definite Hermitian operator. Powers use the
/// principal branch through the positive spectrum: lambda^z = exp(z log lambda).
inline Mat matrix_fn(const Mat& a, MatrixFn fn, Complex z = Complex(1, 0)) {
  HermEig e = herm_eig(a);
  if (fn != MatrixFn::Exp) {
    for (Eigen::Index k = 0; k < e.values.size(); ++k)
      if (e.values(k) <= 0.0) throw Error("matrix_fn: matrix not positive definite");
  }
  Vec fd(e.values.size());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    double lam = e.values(k);
    switch (fn) {
      case MatrixFn::Exp: fd(k) = std::exp(lam); break;
      case MatrixFn::Log: fd(k) = std::log(lam); break;
      case MatrixFn::Power: fd(k) = std::exp(z * std::log(lam)); break;
    }
  }
  return e.vectors * fd.asDiagonal() * e.vectors.adjoint();
}

// ---------------------------------------------------------------------------
// Matrix exponential of general complex matrices
// ---------------------------------------------------------------------------

namespace detail {
// Pade-13 scaling-and-squaring, following Higham's coefficients.
inline Mat expm_pade(const Mat& a) {
  static const double b[] = {64764752532480000., 32382376266240000., 7771770303897600.,
                             1187353796428800.,  129060195264000.,   10559470521600.,
                             670442572800.,      33522128640.,       1323241920.,
                             40840800.,          960960.,            16380.,
                             182.,               1.};
  const int n = static_cast<int>(a.rows());
  double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int squarings = 0;
  Mat as = a;
  const double theta13 = 5.371920351148152;
  if (nrm > theta13) {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / theta13))));
    as /= std::pow(2.0, squarings);
  }
  Mat a2 = as * as;
  Mat a4 = a2 * a2;
  Mat a6 = a2 * a4;
  Mat id = Mat::Identity(n, n);
  Mat u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                b[3] * a2 + b[1] * id);
  Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
          b[2] * a2 + b[0] * id;
  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}
}  // namespace detail

/// exp(scale * M) by scaling-and-squaring. Overflow is rejected up front:
/// norms beyond tolerances().expm_overflow produce meaningless floats.
inline Mat expm(const Mat& m, Complex scale = Complex(1, 0)) {
  if (m.rows() != m.cols()) throw Error("expm: matrix not square");
  Mat sm = scale * m;
  if (sm.cwiseAbs().rowwise().sum().maxCoeff() > tolerances().expm_overflow)
    throw Error("expm: ||scale*M|| exceeds overflow guard");
  return detail::expm_pade(sm);
}

// ---------------------------------------------------------------------------
// General (non-Hermitian) eigendecomposition
// ---------------------------------------------------------------------------
struct GeneralEig {
  Vec values;
  Mat right;                      // columns: right eigenvectors, unit norm
  Mat left;                       // rows: left eigenvectors, biorthogonal (left*right = I)
  std::vector<bool> suspect;      // left/right overlap below threshold
  bool has_left = false;
};

inline GeneralEig general_eig(const Mat& m, bool want_left = true) {
  if (m.rows() != m.cols()) throw Error("general_eig: matrix not square");
  Eigen::ComplexEigenSolver<Mat> solver(m, true);
  if (solver.info() != Eigen::Success)
    throw Error("general_eig: eigensolver failed to converge");
  GeneralEig out;
  out.values = solver.eigenvalues();
  out.right = solver.eigenvectors();
  const int n = static_cast<int>(m.rows());
  out.suspect.assign(n, false);
  if (want_left) {
    Eigen::PartialPivLU<Mat> lu(out.right);
    out.left = lu.solve(Mat::Identity(n, n));  // rows biorthogonal to columns
    out.has_left = true;
    for (int k = 0; k < n; ++k) {
      double ln = out.left.row(k).norm();
      double overlap = 1.0 / std::max(ln, 1e-300);  // |w.v|=1 by construction, ||v||=1
      if (overlap < 1e-10) out.suspect[k] = true;
    }
  }
  return out;
}

/// exp(scale*M) through diagonalization; refuses ill-conditioned eigenbases.
inline Mat expm_eig(const Mat& m, Complex scale = Complex(1, 0),
                    double cond_cap = 1e6) {
  GeneralEig e = general_eig(m, true);
  double cond = 0.0;
  for (int k = 0; k < e.values.size(); ++k)
    cond = std::max(cond, e.left.row(k).norm());
  if (cond > cond_cap) return expm(m, scale);  // fall back to squaring
  Vec d(e.values.size());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) d(k) = std::exp(scale * e.values(k));
  return e.right * d.asDiagonal() * e.left;
}

/// Principal matrix logarithm through diagonalization. Requires a
/// diagonalizable matrix with no spectrum on the closed negative real axis.
inline Mat logm_eig(const Mat& m) {
  GeneralEig e = general_eig(m, true);
  Vec d(e.values.size());
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    Complex lam = e.values(k);
    if (std::abs(lam) == 0.0 || (lam.real() <= 0.0 && std::abs(lam.imag()) < 1e-14 * std::abs(lam.real())))
      throw Error("logm_eig: eigenvalue on the branch cut");
    if (e.suspect[k]) throw Error("logm_eig: matrix possibly non-diagonalizable");
    d(k) = std::log(lam);
  }
  return e.right * d.asDiagonal() * e.left;
}

// ---------------------------------------------------------------------------
// Kronecker products, vectorization, partial trace
// ---------------------------------------------------------------------------
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-stacking vectorization; vec(A X B) = kron(B^T, A) vec(X).
inline Vec vec(const Mat& x) {
  return Eigen::Map<const Vec>(x.data(), x.size());
}

inline Mat unvec(const Vec& v, int d) {
  if (v.size() != Eigen::Index(d) * d) throw Error("unvec: size mismatch");
  return Eigen::Map<const Mat>(v.data(), d, d);
}

enum class TraceSide { First, Second };

/// Partial trace of an operator on A (x) B, composite index a*dB + b.
inline Mat partial_trace(const Mat& x, int da, int db, TraceSide over) {
  if (x.rows() != Eigen::Index(da) * db || x.cols() != Eigen::Index(da) * db)
    throw Error("partial_trace: dimension mismatch");
  if (over == TraceSide::Second) {
    Mat out = Mat::Zero(da, da);
    for (int a = 0; a < da; ++a)
      for (int a2 = 0; a2 < da; ++a2)
        for (int b = 0; b < db; ++b) out(a, a2) += x(a * db + b, a2 * db + b);
    return out;
  }
  Mat out = Mat::Zero(db, db);
  for (int b = 0; b < db; ++b)
    for (int b2 = 0; b2 < db; ++b2)
      for (int a = 0; a < da; ++a) out(b, b2) += x(a * db + b, a * db + b2);
  return out;
}

// ---------------------------------------------------------------------------
// Structured operator types
// ---------------------------------------------------------------------------

/// A square matrix certified Hermitian at construction. The stored matrix is
/// the symmetrization (A + A^dag)/2 of the input.
class HermitianOperator {
 public:
  HermitianOperator() = default;
  explicit HermitianOperator(Mat a) {
    if (a.rows() != a.cols()) throw Error("HermitianOperator: matrix not square");
    if (!is_hermitian(a, tolerances().hermiticity))
      throw Error("HermitianOperator: matrix not Hermitian within tolerance");
    m_ = (a + a.adjoint()) / 2.0;
  }
  const Mat& mat() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Mat m_;
};

/// Faithful density matrix. Eigenvalues are clamped to the faithfulness floor
/// and the trace renormalized to exactly 1; the spectral decomposition is
/// cached so fractional powers are cheap.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(const Mat& rho) : DensityMatrix(HermitianOperator(rho)) {}
  explicit DensityMatrix(const HermitianOperator& rho) {
    double tr = rho.mat().trace().real();
    if (std::abs(rho.mat().trace() - Complex(1.0, 0.0)) > tolerances().trace_check)
      throw Error("DensityMatrix: trace differs from 1 beyond tolerance");
    HermEig e = herm_eig(rho.mat());
    RVec lam = e.values;
    const double floor = tolerances().faithfulness_floor;
    for (Eigen::Index k = 0; k < lam.size(); ++k) lam(k) = std::max(lam(k), floor);
    lam /= lam.sum();
    (void)tr;
    evals_ = lam;
    evecs_ = e.vectors;
    m_ = evecs_ * evals_.cast<Complex>().asDiagonal() * evecs_.adjoint();
  }

  const Mat& mat() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  const RVec& eigenvalues() const { return evals_; }
  const Mat& eigenvectors() const { return evecs_; }

  /// rho^z with the principal branch through the positive spectrum.
  Mat power(Complex z) const {
    Vec d(evals_.size());
    for (Eigen::Index k = 0; k < evals_.size(); ++k)
      d(k) = std::exp(z * std::log(evals_(k)));
    return evecs_ * d.asDiagonal() * evecs_.adjoint();
  }

  Mat log() const {
    Vec d(evals_.size());
    for (Eigen::Index k = 0; k < evals_.size(); ++k) d(k) = std::log(evals_(k));
    return evecs_ * d.asDiagonal() * evecs_.adjoint();
  }

 private:
  Mat m_;
  RVec evals_;
  Mat evecs_;
};

// ---------------------------------------------------------------------------
// Eigenvalue grouping (shared by pinching, measures, NESS)
// ---------------------------------------------------------------------------

/// Indices of `values` grouped by proximity: ascending input is split wherever
/// consecutive values differ by more than tol.
inline std::vector<std::vector<int>> group_close(const RVec& values, double tol) {
  std::vector<int> order(values.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values(a) < values(b); });
  std::vector<std::vector<int>> groups;
  for (int idx : order) {
    if (groups.empty() || values(idx) - values(groups.back().back()) > tol)
      groups.emplace_back();
    groups.back().push_back(idx);
  }
  return groups;
}

}  // namespace qef
