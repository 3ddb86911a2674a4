#include <catch2/catch_amalgamated.hpp>

#include "qef/classical.hpp"
#include "qef/io.hpp"

using namespace qef;

namespace {

MarkovGibbsModel two_state() { return preset_markov("twostate"); }

/// Brute-force path enumeration of the tilted generating function; the oracle
/// for path_cgf_exact.
double cgf_by_enumeration(const MarkovGibbsModel& m, double alpha, int n) {
  double total = 0;
  std::vector<int> path(n + 1);
  std::function<void(int, double, double)> walk = [&](int depth, double w, double g) {
    if (depth == n) {
      total += w * std::exp(-alpha * g);
      return;
    }
    for (int y = 0; y < m.states(); ++y) {
      if (m.p()(path[depth], y) <= 0) continue;
      path[depth + 1] = y;
      walk(depth + 1, w * m.p()(path[depth], y), g + m.increment(path[depth], y));
    }
  };
  for (int x0 = 0; x0 < m.states(); ++x0) {
    path[0] = x0;
    walk(0, m.mu0()(x0), 0.0);
  }
  return std::log(total) / n;
}

}  // namespace

TEST_CASE("model validation") {
  SECTION("rows must sum to one") {
    RMat p(2, 2);
    p << 0.9, 0.2, 0.2, 0.8;
    REQUIRE_THROWS(MarkovGibbsModel(p, RVec::Constant(2, 0.5)));
  }
  SECTION("support must be symmetric") {
    RMat p(2, 2);
    p << 1.0, 0.0, 0.2, 0.8;
    REQUIRE_THROWS_WITH(MarkovGibbsModel(p, RVec::Constant(2, 0.5)),
                        Catch::Matchers::ContainsSubstring("symmetric"));
  }
  SECTION("irreducibility is required") {
    RMat p = RMat::Identity(3, 3);
    REQUIRE_THROWS_WITH(MarkovGibbsModel(p, RVec::Constant(3, 1.0 / 3)),
                        Catch::Matchers::ContainsSubstring("irreducible"));
  }
}

TEST_CASE("stationary vector") {
  SECTION("doubly stochastic gives the uniform vector") {
    RMat p(3, 3);
    p << 0.2, 0.5, 0.3, 0.5, 0.2, 0.3, 0.3, 0.3, 0.4;
    MarkovGibbsModel m(p, RVec::Constant(3, 1.0 / 3));
    REQUIRE((m.pi() - RVec::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("two-state closed form") {
    MarkovGibbsModel m = two_state();
    REQUIRE(m.pi()(0) == Catch::Approx(2.0 / 3).margin(1e-12));
    REQUIRE(m.pi()(1) == Catch::Approx(1.0 / 3).margin(1e-12));
  }
}

TEST_CASE("path cumulant generating function") {
  MarkovGibbsModel m = two_state();
  SECTION("alpha = 0 vanishes exactly") {
    for (int n : {1, 7, 40}) REQUIRE(std::abs(path_cgf_exact(m, 0.0, n)) < 1e-14);
  }
  SECTION("symmetric chains produce zero entropy") {
    RMat p(2, 2);
    p << 0.7, 0.3, 0.3, 0.7;
    MarkovGibbsModel sym(p, RVec::Constant(2, 0.5));
    for (double a : {-1.0, 0.5, 2.0})
      REQUIRE(std::abs(path_cgf_exact(sym, a, 11)) < 1e-13);
  }
  SECTION("matrix powering matches exhaustive enumeration") {
    for (double a : {0.5, -0.7, 1.3}) {
      REQUIRE(std::abs(path_cgf_exact(m, a, 10) - cgf_by_enumeration(m, a, 10)) <=
              1e-12);
    }
    MarkovGibbsModel m4 = preset_markov("fourstate-random");
    REQUIRE(std::abs(path_cgf_exact(m4, 0.4, 8) - cgf_by_enumeration(m4, 0.4, 8)) <=
            1e-12);
  }
}

TEST_CASE("pressure as a Perron root") {
  MarkovGibbsModel m = two_state();
  SECTION("alpha = 0 gives zero") { REQUIRE(std::abs(pressure(m, 0.0)) < 1e-12); }
  SECTION("gallavotti-cohen symmetry is exact") {
    for (double a : {-2.0, -0.7, 0.1, 0.5, 1.4, 3.0})
      REQUIRE(std::abs(pressure(m, a) - pressure(m, 1.0 - a)) <= 1e-12);
  }
  SECTION("two-state closed form at alpha = 1/2") {
    // symmetrized off-diagonal entries sqrt(p12 p21)
    Mat sym(2, 2);
    sym << 0.9, std::sqrt(0.02), std::sqrt(0.02), 0.8;
    HermEig e = herm_eig(sym);
    REQUIRE(pressure(m, 0.5) ==
            Catch::Approx(std::log(e.values(1))).margin(1e-12));
  }
  SECTION("finite-n rate converges at O(1/n)") {
    double a = 0.6;
    double e_inf = pressure(m, a);
    double gap_100 = std::abs(path_cgf_exact(m, a, 100) - e_inf);
    double gap_400 = std::abs(path_cgf_exact(m, a, 400) - e_inf);
    REQUIRE(gap_400 <= 5e-3);
    REQUIRE(gap_400 <= gap_100 / 2.0);  // consistent with ~1/n decay
  }
  SECTION("independent of the initial measure in the limit") {
    RVec skew(2);
    skew << 0.95, 0.05;
    MarkovGibbsModel m_skew = two_state().with_initial(skew);
    double a = 0.6;
    double one = path_cgf_exact(m_skew, a, 400);
    double two = path_cgf_exact(m, a, 400);
    REQUIRE(std::abs(one - two) <= 5e-3);
    REQUIRE(std::abs(one - pressure(m, a)) <= 5e-3);
  }
  SECTION("convexity and analyticity margin on a grid") {
    std::vector<double> es;
    for (int k = 0; k <= 50; ++k) es.push_back(pressure(m, -2.0 + 5.0 * k / 50));
    for (size_t i = 1; i + 1 < es.size(); ++i)
      REQUIRE(es[i + 1] - 2 * es[i] + es[i - 1] >= -1e-10);
  }
  SECTION("four-state pressure is nontrivial, convex, symmetric, gapped") {
    MarkovGibbsModel m4 = preset_markov("fourstate-random");
    REQUIRE(pressure(m4, 0.5) < -1e-4);  // genuinely below zero off alpha in {0,1}
    std::vector<double> es;
    for (int k = 0; k <= 50; ++k) {
      double a = -2.0 + 5.0 * k / 50;
      es.push_back(pressure(m4, a));
      REQUIRE(std::abs(pressure(m4, a) - pressure(m4, 1.0 - a)) <= 1e-12);
      // Perron simplicity margin
      GeneralEig eig = general_eig(m4.tilted(a).cast<Complex>(), false);
      std::vector<double> mags;
      for (Eigen::Index q = 0; q < eig.values.size(); ++q)
        mags.push_back(std::abs(eig.values(q)));
      std::sort(mags.begin(), mags.end());
      REQUIRE(mags[3] - mags[2] > 1e-6);
    }
    for (size_t i = 1; i + 1 < es.size(); ++i)
      REQUIRE(es[i + 1] - 2 * es[i] + es[i - 1] >= -1e-10);
  }
}

TEST_CASE("classical cocycle and Evans-Searles relation") {
  SECTION("symmetric chain gives a point mass at zero") {
    RMat p(2, 2);
    p << 0.7, 0.3, 0.3, 0.7;
    MarkovGibbsModel sym(p, RVec::Constant(2, 0.5));
    AtomicMeasure q = classical_cocycle_law(sym, 5);
    REQUIRE(q.atoms().size() == 1);
    REQUIRE(std::abs(q.atoms()[0].first) < 1e-12);
  }
  SECTION("cocycle is antisymmetric under path reversal") {
    MarkovGibbsModel m = two_state().at_stationarity();
    std::vector<int> path{0, 1, 1, 0, 1};
    std::vector<int> rev(path.rbegin(), path.rend());
    REQUIRE(classical_cocycle(m, path) ==
            Catch::Approx(-classical_cocycle(m, rev)).margin(1e-14));
  }
  SECTION("exact reflection symmetry at stationarity") {
    REQUIRE(evans_searles_check(two_state().at_stationarity(), 6) <= 1e-9);
    REQUIRE(evans_searles_check(preset_markov("fourstate-random").at_stationarity(),
                                5) <= 1e-9);
  }
  SECTION("away from stationarity the check is refused") {
    REQUIRE_THROWS_WITH(evans_searles_check(two_state(), 4),
                        Catch::Matchers::ContainsSubstring("stationary"));
  }
  SECTION("mean entropy production is nonnegative at stationarity") {
    // every two-state chain is reversible, so its cocycle vanishes identically
    AtomicMeasure q2 = classical_cocycle_law(two_state().at_stationarity(), 6);
    REQUIRE(q2.mean() >= -1e-12);
    REQUIRE(std::abs(q2.atoms().front().first) < 1e-12);
    // a four-state chain carries genuine cycle currents
    AtomicMeasure q4 =
        classical_cocycle_law(preset_markov("fourstate-random").at_stationarity(), 6);
    REQUIRE(q4.mean() > 1e-3);
  }
}

TEST_CASE("classical rate function") {
  MarkovGibbsModel m = two_state();
  std::vector<double> sgrid;
  for (int k = -30; k <= 30; ++k) sgrid.push_back(0.02 * k);

  SECTION("gallavotti-cohen residual") {
    RateFunction rf = classical_rate_function(m, sgrid);
    REQUIRE(fluctuation_relation_residual(rf) <= 1e-6);
    REQUIRE(rf.discrete_convexity_residual() <= 1e-8);
  }
  SECTION("minimum sits at the mean production rate") {
    RateFunction rf = classical_rate_function(m, sgrid);
    // mean rate from the derivative of the pressure at zero
    double h = 1e-5;
    double mean_rate = -(pressure(m, h) - pressure(m, -h)) / (2 * h);
    size_t best = 0;
    for (size_t i = 0; i < sgrid.size(); ++i)
      if (rf.values[i] < rf.values[best]) best = i;
    REQUIRE(std::abs(sgrid[best] - mean_rate) <= 0.03);
    REQUIRE(rf.values[best] <= 1e-6);
  }
  SECTION("symmetric chain degenerates to a point") {
    RMat p(2, 2);
    p << 0.7, 0.3, 0.3, 0.7;
    MarkovGibbsModel sym(p, RVec::Constant(2, 0.5));
    std::vector<double> grid{-0.4, -0.2, 0.0, 0.2, 0.4};
    RateFunction rf = classical_rate_function(sym, grid);
    REQUIRE(std::abs(rf.values[2]) <= 1e-10);     // I(0) = 0
    for (size_t i : {size_t(0), size_t(4)}) REQUIRE(rf.values[i] > 0.5);
  }
}

TEST_CASE("classical transfer spectrum") {
  MarkovGibbsModel m = two_state();
  std::vector<double> grid{-1.0, 0.0, 0.25, 0.5, 0.75, 1.0, 2.0};
  auto pts = classical_transfer_spectrum(m, grid);
  REQUIRE(pts.size() == grid.size());

  SECTION("resonance matches the Perron oracle") {
    for (const auto& pt : pts) {
      REQUIRE(pt.ok);
      REQUIRE(std::abs(pt.resonance.imag() - pt.log_perron) <= 1e-9);
      REQUIRE(std::abs(pt.resonance.real()) <= 1e-9);
    }
  }
  SECTION("alpha = 0 gives Perron root one, rate zero") {
    REQUIRE(std::abs(pts[1].log_perron) <= 1e-12);
    REQUIRE(std::abs(pts[1].resonance) <= 1e-9);
  }
  SECTION("alpha = 1/2 member is symmetric with real spectrum") {
    RMat t = m.tilted(0.5);
    REQUIRE((t - t.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  SECTION("curve is symmetric about alpha = 1/2") {
    REQUIRE(std::abs(pts[2].log_perron - pts[4].log_perron) <= 1e-12);  // 0.25 vs 0.75
    REQUIRE(std::abs(pts[0].log_perron - pts[6].log_perron) <= 1e-12);  // -1 vs 2
  }
}
