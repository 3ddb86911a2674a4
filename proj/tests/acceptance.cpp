// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Criterion 11 exercises the CLI binary whose path is passed as argv[1].

#include "qef/experiments.hpp"
#include "qef/qef.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace qef;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, double budget_seconds,
               const std::function<std::pair<bool, std::string>()>& body) {
  auto t0 = Clock::now();
  bool pass = false;
  std::string detail;
  try {
    auto [ok, msg] = body();
    pass = ok;
    detail = msg;
  } catch (const std::exception& e) {
    pass = false;
    detail = std::string("exception: ") + e.what();
  }
  double wall = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_seconds > 0 && wall > budget_seconds) {
    pass = false;
    detail += " [over runtime budget " + std::to_string(budget_seconds) + " s]";
  }
  std::printf("[%s] %2d. %-32s %7.1f s  %s\n", pass ? "PASS" : "FAIL", number,
              name.c_str(), wall, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<Complex> alpha_battery() {
  std::vector<Complex> alphas;
  for (int k = 0; k < 11; ++k) alphas.emplace_back(0.0, -2.0 + 4.0 * k / 10);
  for (int k = 1; k <= 10; ++k) alphas.emplace_back(k / 11.0, 0.0);
  return alphas;
}

FiniteQuantumSystem random_finite_system(int d, std::uint64_t seed) {
  Rng rng(seed);
  return {HermitianOperator(rng.hermitian(d)), DensityMatrix(rng.density(d))};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli_path = argc > 1 ? argv[1] : "";
  OpenQuantumSystem demo = preset_system("demo32");
  const FiniteQuantumSystem& dsys = demo.sys();

  criterion(1, "oracle equivalence (2TMEP)", 60.0, [&] {
    std::vector<Complex> alphas = alpha_battery();
    std::vector<double> ts{0.4, 0.9, 1.5, 2.2, 3.0};
    double worst = 0;
    auto battery = [&](const FiniteQuantumSystem& sys, const Mat& nu) {
      for (double t : ts) {
        AtomicMeasure q = two_time_measure(sys, nu, t);
        for (Complex a : alphas)
          worst = std::max(worst, std::abs(f2tm(sys, nu, t, a) - q.laplace(a)));
      }
    };
    battery(dsys, dsys.omega().mat());
    Rng nurng(77);
    battery(dsys, nurng.density(32));
    int k = 0;
    for (int d : {5, 8, 12, 16, 16}) {
      FiniteQuantumSystem sys = random_finite_system(d, 1000 + 17 * k);
      battery(sys, sys.omega().mat());
      battery(sys, Rng(2000 + k).density(d));
      ++k;
    }
    return std::make_pair(worst <= 1e-9, "max |f2tm - laplace| = " + fmt(worst) +
                                             " (tol 1e-9)");
  });

  criterion(2, "EAST literal simulation", 30.0, [&] {
    Rng rng(33);
    Mat rho(2, 2);
    rho << 0.5, 0.5, 0.5, 0.5;
    double worst_f = 0, worst_diag = 0;
    for (int k = 0; k < 50; ++k) {
      Mat nu = (k % 3 == 0) ? dsys.omega().mat() : Mat(rng.density(32));
      Complex a(0.0, rng.uniform(-2.0, 2.0));
      double t = rng.uniform(0.05, 2.0);
      AncillaResult r = ancilla_simulate(demo, nu, rho, a, t);
      worst_f = std::max(worst_f,
                         std::abs(r.f_estimate - f_ancilla(dsys, nu, t, a)));
      worst_diag = std::max(worst_diag, r.diag_residual);
    }
    bool ok = worst_f <= 1e-9 && worst_diag <= 1e-10;
    return std::make_pair(ok, "max |estimate - F| = " + fmt(worst_f) +
                                  " (tol 1e-9), diag " + fmt(worst_diag) +
                                  " (tol 1e-10)");
  });

  criterion(3, "Liouvillean representations", 120.0, [&] {
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> Ts{0.0, 0.8, 1.5};
    double worst = 0;
    for (double t : Ts)
      for (double ar : alphas) {
        Complex a(ar, 0);
        worst = std::max(worst, std::abs(rep_2tm(demo, t, a) -
                                         f2tm(dsys, dsys.omega().mat(), t, a)));
      }
    for (double T : Ts) {
      Mat omega_T = dsys.evolve(dsys.omega(), T).mat();
      for (double t : Ts)
        for (double ar : alphas) {
          Complex a(ar, 0);
          worst = std::max(worst, std::abs(rep_qpsc(demo, T, t, a) -
                                           f_qpsc(dsys, omega_T, t, a)));
          worst = std::max(worst, std::abs(rep_ancilla(demo, T, t, a) -
                                           f_ancilla(dsys, omega_T, t, a)));
        }
    }
    return std::make_pair(worst <= 1e-8,
                          "max rep vs trace formula = " + fmt(worst) + " (tol 1e-8)");
  });

  criterion(4, "modular algebra suite", 90.0, [&] {
    std::ostringstream msg;
    bool ok = true;
    auto check = [&](const char* what, double resid, double tol) {
      ok = ok && resid <= tol;
      msg << what << " " << fmt(resid) << (resid <= tol ? "" : "(FAIL)") << " ";
    };
    CocycleResiduals cr =
        multiplicative_cocycle_check(dsys, 0.7, 1.3, Complex(0, 0.4));
    check("tom-vac", cr.multiplicative, 1e-9);
    check("chain", cr.chain_rule, 1e-10);
    check("gen-cocycle", cr.gen_cocycle, 1e-10);
    {
      double t = 0.8, s = -1.3;
      check("additive",
            max_abs(cocycle_ct(dsys, t + s) -
                    (cocycle_ct(dsys, t) + dsys.heisenberg(cocycle_ct(dsys, s), t))),
            1e-10);
    }
    {
      double t = 1.0;
      double ent = relative_entropy(dsys.evolve(dsys.omega(), t), dsys.omega());
      check("ent=-w(c)",
            std::abs(ent + (dsys.omega().mat() * cocycle_ct(dsys, t)).trace().real()),
            1e-10);
      double balance = -integrate_gl(
          [&](double s) {
            return (dsys.evolve(dsys.omega(), s).mat() *
                    entropy_production_sigma(demo))
                .trace()
                .real();
          },
          0.0, t, 64);
      check("balance", std::abs(ent - balance), 1e-8);
      Mat viaq = integrate_gl([&](double s) { return sigma_at(demo, s); }, 0.0, t, 64);
      check("c=int(sigma)", max_abs(cocycle_ct(dsys, t) - viaq), 1e-8);
      Mat logdec = integrate_gl(
          [&](double s) {
            return dsys.heisenberg(entropy_production_sigma(demo), -s);
          },
          0.0, t, 64);
      check("logdelta", max_abs(ell(dsys, t) - logdec), 1e-8);
    }
    check("w(sigma)",
          std::abs((dsys.omega().mat() * entropy_production_sigma(demo)).trace()),
          1e-11);
    {
      Mat s = entropy_production_sigma(demo);
      check("theta(sigma)", max_abs(time_reversal(dsys, s) + s), 1e-10);
      check("theta(c)",
            max_abs(time_reversal(dsys, cocycle_ct(dsys, 0.7)) - cocycle_ct(dsys, -0.7)),
            1e-10);
    }
    check("dyson4",
          max_abs(connes_cocycle_dyson(demo, 0.3, Complex(0, 0.25), 4) -
                  connes_cocycle_t(dsys, 0.3, Complex(0, 0.25))),
          1e-5);
    return std::make_pair(ok, msg.str());
  });

  criterion(5, "fluctuation relations", 0.0, [&] {
    std::vector<Complex> grid;
    for (int k = 0; k <= 10; ++k)
      for (double im : {-1.0, 0.0, 1.0}) grid.emplace_back(k / 10.0, im);
    double worst_es = 0, worst_refl = 0;
    for (double t : {0.5, 1.0, 2.0}) {
      worst_es = std::max(worst_es, es_symmetry_residual(dsys, t, grid));
      worst_refl = std::max(worst_refl, measure_reflection_check(dsys, t));
    }
    OpenQuantumSystem control = preset_system("demo32-complex");
    double control_resid = es_symmetry_residual(control.sys(), 1.0, grid);
    bool ok = worst_es <= 1e-9 && worst_refl <= 1e-8 && control_resid > 1e-4;
    return std::make_pair(ok, "es " + fmt(worst_es) + " (tol 1e-9), refl " +
                                  fmt(worst_refl) + " (tol 1e-8), control " +
                                  fmt(control_resid) + " (> 1e-4)");
  });

  criterion(6, "sandwich bounds", 0.0, [&] {
    double min_slack = std::numeric_limits<double>::infinity();
    for (double T : {0.0, 1.0, 2.0})
      for (double t : {0.5, 1.5})
        for (double a : {-0.4, 0.3, 0.45}) {
          SandwichReport r = sandwich_bounds_check(demo, T, t, a);
          min_slack = std::min(min_slack, r.slack_min);
        }
    return std::make_pair(min_slack >= -1e-10,
                          "min slack = " + fmt(min_slack) + " (>= -1e-10)");
  });

  criterion(7, "alpha-Liouvillean structure", 0.0, [&] {
    std::ostringstream msg;
    bool ok = true;
    auto check = [&](const char* what, double resid, double tol) {
      ok = ok && resid <= tol;
      msg << what << " " << fmt(resid) << (resid <= tol ? "" : "(FAIL)") << " ";
    };
    GnsSpace gns(demo.omega());
    check("L12.Omega", alpha_liouvillean(demo, 0.5).op.apply_vec(gns.Omega()).norm(),
          1e-10);
    for (Complex a : {Complex(0.3, 0.45), Complex(0, 0.7)})
      check("adjoint",
            max_abs(alpha_liouvillean(demo, a).dense().adjoint() -
                    alpha_liouvillean(demo, -std::conj(a)).dense()),
            1e-10);
    {
      Complex a(0.3, 0.1);
      Mat la = alpha_liouvillean(demo, a).dense();
      Mat l0 = standard_liouvillean(dsys).dense();
      double worst = 0;
      for (double t : {0.5, -1.5, 3.0}) {
        Mat lhs = expm(la, Complex(0, t));
        Mat rhs = expm(l0, Complex(0, t)) *
                  kron(connes_cocycle_t(dsys, t, std::conj(a)).conjugate(),
                       Mat::Identity(32, 32));
        worst = std::max(worst, max_abs(lhs - rhs));
      }
      check("tpar-L", worst, 1e-8);
    }
    {
      Complex a(0, 0.4);
      Mat lhat = hat_liouvillean(demo, a).dense();
      Mat lmid = alpha_liouvillean(demo, 0.5 - a).dense();
      Mat dminus = kron(dsys.omega().power(a / 2.0).transpose().eval(),
                        dsys.omega().power(-a / 2.0));
      Mat dplus = kron(dsys.omega().power(-a / 2.0).transpose().eval(),
                       dsys.omega().power(a / 2.0));
      check("sun-tuluz", max_abs(lhat - dminus * lmid * dplus), 1e-9);
      GeneralEig ea = general_eig(lhat, false);
      GeneralEig eb = general_eig(lmid, false);
      std::vector<bool> used(eb.values.size(), false);
      double worst = 0;
      for (Eigen::Index i = 0; i < ea.values.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = -1;
        for (Eigen::Index j = 0; j < eb.values.size(); ++j) {
          if (used[j]) continue;
          double dd = std::abs(ea.values(i) - eb.values(j));
          if (dd < best) {
            best = dd;
            arg = static_cast<int>(j);
          }
        }
        used[arg] = true;
        worst = std::max(worst, best);
      }
      check("spectra", worst, 1e-8);
    }
    return std::make_pair(ok, msg.str());
  });

  criterion(8, "spectral NESS", 0.0, [&] {
    NessResult ness = ness_cesaro(dsys);
    Rng rng(55);
    double worst_spec = 0;
    for (int k = 0; k < 3; ++k) {
      Mat a = rng.hermitian(32);
      Complex spec = ness_via_spectral_projection(demo, a);
      Complex pin = (ness.state.mat() * a).trace();
      worst_spec = std::max(worst_spec, std::abs(spec - pin));
    }
    Mat quad = cesaro_average_quadrature(dsys, 2000.0, 0.05);
    double quad_gap = max_abs(ness.state.mat() - quad);
    bool ok = worst_spec <= 1e-9 && quad_gap <= 5e-3;
    return std::make_pair(ok, "spectral vs pinching " + fmt(worst_spec) +
                                  " (tol 1e-9), vs quadrature " + fmt(quad_gap) +
                                  " (tol 5e-3)");
  });

  criterion(9, "resonance prologue", 0.0, [&] {
    std::ostringstream msg;
    bool ok = true;
    auto check = [&](const char* what, double resid, double tol) {
      ok = ok && resid <= tol;
      msg << what << " " << fmt(resid) << (resid <= tol ? "" : "(FAIL)") << " ";
    };
    {
      // gapped non-normal 6x6 with known spectrum through a fixed similarity
      Rng rng(91);
      Mat diag = Mat::Zero(6, 6);
      diag(0, 0) = Complex(0.2, 0.0);
      for (int k = 1; k < 6; ++k) diag(k, k) = Complex(0.1 * k, -0.6 - 0.15 * k);
      Mat s(6, 6);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
          s(i, j) = (i == j ? 2.0 : 0.0) + Complex(rng.uniform(-0.4, 0.4),
                                                   rng.uniform(-0.4, 0.4));
      Mat sinv = s.inverse();
      Mat l = s * diag * sinv;
      Vec phi = Vec::Ones(6), psi(6);
      for (int i = 0; i < 6; ++i) psi(i) = Complex(0.3 + 0.1 * i, -0.2);
      ResonanceResult r = dominant_pole(l, phi, psi);
      check("pole", std::abs(r.pole - Complex(0.2, 0.0)), 1e-10);
      check("order", std::abs(r.order - 1.0), 0.0);
      Complex expected_residue = phi.dot(s.col(0)) * (sinv.row(0) * psi)(0);
      check("residue", std::abs(r.residue - expected_residue), 1e-10);
      std::vector<double> grid;
      for (int k = 0; k <= 25; ++k) grid.push_back(5.0 + k);
      double fitted = asymptotic_residual(l, phi, psi, r, grid);
      check("boundedK", fitted < 1e3 ? 0.0 : fitted, 0.0);
    }
    {
      // Jordan block: pole of order 2, degree-1 polynomial prefactor
      Mat l = Mat::Zero(3, 3);
      l(0, 0) = l(1, 1) = Complex(0.0, -0.2);
      l(0, 1) = 1.0;
      l(2, 2) = Complex(0.0, -1.5);
      Vec v(3);
      v << 1, 1, 0.5;
      v /= v.norm();
      ResonanceResult r = dominant_pole(l, v, v);
      check("j.pole", std::abs(r.pole - Complex(0, -0.2)), 1e-10);
      check("j.order", std::abs(r.order - 2.0), 0.0);
      check("j.degree", r.poly.size() == 2 ? 0.0 : 1.0, 0.0);
      double t = 7.0;
      // degree-1 prefactor plus the exactly known subdominant eigenterm
      Complex pred = std::exp(Complex(0, -t) * r.pole) * (r.poly[0] + r.poly[1] * t) +
                     std::exp(Complex(0, -t) * l(2, 2)) * std::norm(v(2));
      Complex exact = v.dot(expm(l, Complex(0, -t)) * v);
      check("j.closedform", std::abs(pred - exact) / std::abs(exact), 1e-8);
    }
    return std::make_pair(ok, msg.str());
  });

  criterion(10, "classical strong PREF", 120.0, [&] {
    std::ostringstream msg;
    bool ok = true;
    auto check = [&](const char* what, double resid, double tol) {
      ok = ok && resid <= tol;
      msg << what << " " << fmt(resid) << (resid <= tol ? "" : "(FAIL)") << " ";
    };
    int model_idx = 0;
    for (const char* name : {"twostate", "fourstate-random"}) {
      MarkovGibbsModel m = preset_markov(name);
      std::string tag = model_idx == 0 ? "2st." : "4st.";
      double worst_sym = 0;
      for (int k = 0; k <= 30; ++k) {
        double a = -2.0 + 5.0 * k / 30;
        worst_sym = std::max(worst_sym, std::abs(pressure(m, a) - pressure(m, 1.0 - a)));
      }
      check((tag + "gc-pressure").c_str(), worst_sym, 1e-12);

      double worst_cgf = 0;
      for (double a : {-0.5, 0.3, 0.6, 1.2})
        worst_cgf = std::max(worst_cgf,
                             std::abs(path_cgf_exact(m, a, 400) - pressure(m, a)));
      check((tag + "cgf400").c_str(), worst_cgf, 5e-3);

      // O(1/n) decay: n * gap stays within a factor-2 band (or is negligible)
      {
        double a = 0.6;
        double e = pressure(m, a);
        std::vector<double> scaled;
        for (int n : {100, 200, 400})
          scaled.push_back(n * std::abs(path_cgf_exact(m, a, n) - e));
        double lo = *std::min_element(scaled.begin(), scaled.end());
        double hi = *std::max_element(scaled.begin(), scaled.end());
        bool one_over_n = hi <= 2.0 * lo + 1e-6;
        check((tag + "1/n-fit").c_str(), one_over_n ? 0.0 : hi / std::max(lo, 1e-300),
              0.5);
      }

      std::vector<double> sgrid;
      for (int k = -30; k <= 30; ++k) sgrid.push_back(0.02 * k);
      RateFunction rf = classical_rate_function(m, sgrid);
      check((tag + "gc-rate").c_str(), fluctuation_relation_residual(rf), 1e-6);

      double worst_enum = 0;
      for (double a : {0.5, -0.7}) {
        double powered = path_cgf_exact(m, a, 12);
        // exhaustive enumeration over all 12-step paths
        double total = 0;
        std::vector<int> path(13);
        std::function<void(int, double, double)> walk = [&](int depth, double w,
                                                            double g) {
          if (depth == 12) {
            total += w * std::exp(-a * g);
            return;
          }
          for (int y = 0; y < m.states(); ++y) {
            if (m.p()(path[depth], y) <= 0) continue;
            path[depth + 1] = y;
            walk(depth + 1, w * m.p()(path[depth], y),
                 g + m.increment(path[depth], y));
          }
        };
        for (int x0 = 0; x0 < m.states(); ++x0) {
          path[0] = x0;
          walk(0, m.mu0()(x0), 0.0);
        }
        worst_enum = std::max(worst_enum, std::abs(powered - std::log(total) / 12));
      }
      check((tag + "enum").c_str(), worst_enum, 1e-12);

      // initial-measure independence of the fitted rate (Richardson over n, 2n)
      auto fitted = [&](const MarkovGibbsModel& mm, double a) {
        return 2.0 * path_cgf_exact(mm, a, 800) - path_cgf_exact(mm, a, 400);
      };
      RVec skew(m.states());
      for (int i = 0; i < m.states(); ++i)
        skew(i) = (i == 0) ? 0.9 : 0.1 / (m.states() - 1);
      double drift = 0;
      for (double a : {0.25, 0.6})
        for (const RVec& mu0 : {m.mu0(), skew, m.pi()})
          drift = std::max(drift,
                           std::abs(fitted(m.with_initial(mu0), a) - pressure(m, a)));
      check((tag + "mu0-indep").c_str(), drift, 1e-4);
      ++model_idx;
    }
    return std::make_pair(ok, msg.str());
  });

  criterion(11, "CLI determinism", 0.0, [&] {
    if (cli_path.empty())
      return std::make_pair(false, std::string("CLI path not supplied as argv[1]"));
    std::string base = "/tmp/qef_acceptance_cli";
    std::filesystem::remove_all(base + "_a");
    std::filesystem::remove_all(base + "_b");
    std::string args = " two-time --preset mini8 --t 0.2:1.4:4 --alpha 0:1:7 --seed 5";
    std::string quiet = " 2>/dev/null";
    if (std::system((cli_path + args + " --out " + base + "_a" + quiet).c_str()) != 0)
      return std::make_pair(false, std::string("first CLI run failed"));
    if (std::system((cli_path + args + " --out " + base + "_b" + quiet).c_str()) != 0)
      return std::make_pair(false, std::string("second CLI run failed"));
    for (const char* f : {"f2tm.csv", "measures.csv", "manifest.json",
                          "residuals.json"}) {
      if (slurp(base + "_a/" + f) != slurp(base + "_b/" + f))
        return std::make_pair(false, std::string(f) + " differs between runs");
    }
    // a classical run must be deterministic as well
    std::string cargs = " classical-pref --model twostate --alpha -1:2:31 --seed 5";
    if (std::system((cli_path + cargs + " --out " + base + "_a" + quiet).c_str()) != 0)
      return std::make_pair(false, std::string("classical CLI run failed"));
    if (std::system((cli_path + cargs + " --out " + base + "_b" + quiet).c_str()) != 0)
      return std::make_pair(false, std::string("classical CLI rerun failed"));
    for (const char* f : {"pressure.csv", "rate.csv", "residuals.json"}) {
      if (slurp(base + "_a/" + f) != slurp(base + "_b/" + f))
        return std::make_pair(false, std::string(f) + " differs between runs");
    }
    return std::make_pair(true, std::string("byte-identical CSV/JSON across reruns"));
  });

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ACCEPTED" : "REJECTED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
