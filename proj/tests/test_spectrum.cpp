#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gmusic/montecarlo.hpp"
#include "gmusic/spectrum.hpp"

using namespace gmusic;

namespace {

// Independent evaluation of phi straight from its definition.
double phi_ref(double w, const std::vector<double>& g, double s2, double c) {
  double f = 0.0;
  for (double x : g) f += 1.0 / (x - w);
  f /= static_cast<double>(g.size());
  const double u = 1.0 - c * s2 * f;
  return w * u * u + (1.0 - c) * s2 * u;
}

double u_ref(double w, const std::vector<double>& g, double s2, double c) {
  double f = 0.0;
  for (double x : g) f += 1.0 / (x - w);
  return 1.0 - c * s2 * f / static_cast<double>(g.size());
}

SignalSpectrum mp_spectrum(int m = 4, double s2 = 1.0, double c = 0.25) {
  return SignalSpectrum(std::vector<double>(static_cast<std::size_t>(m), 0.0), s2, c);
}

// Marchenko-Pastur Stieltjes transform: root of
// s2 c z m^2 + (z - s2 (1 - c)) m + 1 = 0 with Im m Im z > 0.
Complex mp_stieltjes(Complex z, double s2, double c) {
  const Complex a = s2 * c * z;
  const Complex b = z - s2 * (1.0 - c);
  const Complex disc = std::sqrt(b * b - 4.0 * a);
  const Complex r1 = (-b + disc) / (2.0 * a);
  const Complex r2 = (-b - disc) / (2.0 * a);
  return r1.imag() * z.imag() > 0.0 ? r1 : r2;
}

double mp_density(double x, double s2, double c) {
  const double lo = s2 * std::pow(1.0 - std::sqrt(c), 2);
  const double hi = s2 * std::pow(1.0 + std::sqrt(c), 2);
  if (x <= lo || x >= hi) return 0.0;
  return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * s2 * c * x);
}

struct RandomSpectrum {
  std::vector<double> gammas;
  double s2;
  double c;
};

RandomSpectrum random_spectrum(std::mt19937_64& rng, int m = 10) {
  std::uniform_int_distribution<int> kd(1, 3);
  std::uniform_real_distribution<double> gd(0.3, 12.0);
  std::uniform_real_distribution<double> sd(0.05, 1.0);
  std::uniform_real_distribution<double> cd(0.1, 0.8);
  RandomSpectrum r;
  r.gammas.assign(static_cast<std::size_t>(m), 0.0);
  const int k = kd(rng);
  for (int i = 0; i < k; ++i) r.gammas[static_cast<std::size_t>(m - 1 - i)] = gd(rng);
  std::sort(r.gammas.begin(), r.gammas.end());
  r.s2 = sd(rng);
  r.c = cd(rng);
  return r;
}

// Local extrema of phi_ref with phi > 0 and u > 0 located on a dense grid
// between poles.
std::vector<double> dense_extrema(const RandomSpectrum& r) {
  std::vector<double> poles = {0.0};
  for (double g : r.gammas) {
    if (g > 0.0 && g != poles.back()) poles.push_back(g);
  }
  const double top = poles.back() + 10.0 * (r.s2 + poles.back()) + 10.0;
  std::vector<std::pair<double, double>> spans;
  spans.emplace_back(-3.0 * r.s2 - 1.0, 0.0);
  for (std::size_t i = 0; i + 1 < poles.size(); ++i) spans.emplace_back(poles[i], poles[i + 1]);
  spans.emplace_back(poles.back(), top);
  std::vector<double> out;
  const int n = 40000;
  for (auto [a, b] : spans) {
    // Geometric crowding at both ends through a cosine map.
    std::vector<double> xs;
    for (int i = 1; i < n; ++i) {
      const double t = 0.5 - 0.5 * std::cos(std::numbers::pi * i / n);
      xs.push_back(a + (b - a) * t);
    }
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
      const double p0 = phi_ref(xs[i - 1], r.gammas, r.s2, r.c);
      const double p1 = phi_ref(xs[i], r.gammas, r.s2, r.c);
      const double p2 = phi_ref(xs[i + 1], r.gammas, r.s2, r.c);
      const bool ext = (p1 > p0 && p1 >= p2) || (p1 < p0 && p1 <= p2);
      // All three samples inside u > 0, or the grid may straddle the
      // narrow phi < 0 window next to a zero of u.
      const bool u_pos = u_ref(xs[i - 1], r.gammas, r.s2, r.c) > 0.0 &&
                         u_ref(xs[i], r.gammas, r.s2, r.c) > 0.0 &&
                         u_ref(xs[i + 1], r.gammas, r.s2, r.c) > 0.0;
      if (ext && p1 > 0.0 && u_pos) out.push_back(xs[i]);
    }
  }
  return out;
}

SignalSpectrum exp1_spectrum(double snr_db) {
  const ExperimentConfig cfg = preset("exp1");
  const ArrayScenario sc = cfg.scenario_at(snr_db);
  return SignalSpectrum::from_signal(signal_matrix(sc, generate_sources(sc)), sc.k,
                                     sc.noise_variance(), sc.ratio());
}

}  // namespace

TEST(Spectrum, ConstructorValidates) {
  EXPECT_THROW(SignalSpectrum({1.0, 2.0}, 1.0, 0.5), ValidationError);
  EXPECT_THROW(SignalSpectrum({0.0, 2.0}, 0.0, 0.5), ValidationError);
  EXPECT_THROW(SignalSpectrum({0.0, 2.0}, 1.0, 1.0), ValidationError);
  EXPECT_THROW(SignalSpectrum({0.0, -2.0}, 1.0, 0.5), ValidationError);
  const SignalSpectrum s({3.0, 0.0, 3.0 * (1 + 1e-12), 1.0}, 1.0, 0.5);
  EXPECT_EQ(s.zero_count(), 1);
  EXPECT_EQ(s.distinct_count(), 2);
  EXPECT_EQ(s.multiplicity()[1], 2);
  EXPECT_TRUE(std::is_sorted(s.gammas().begin(), s.gammas().end()));
}

TEST(Spectrum, FromSignalKeepsRankEigenvalues) {
  CMatrix b = CMatrix::Zero(4, 8);
  b(3, 0) = 2.0;
  b(2, 1) = Complex(0.0, 1.0);
  const auto s = SignalSpectrum::from_signal(b, 2, 0.5, 0.5);
  EXPECT_EQ(s.zero_count(), 2);
  EXPECT_NEAR(s.gammas()[2], 1.0, 1e-12);
  EXPECT_NEAR(s.gammas()[3], 4.0, 1e-12);
}

TEST(FValue, Examples) {
  EXPECT_NEAR(f_value(-1.0, mp_spectrum()), 1.0, 1e-15);
  const SignalSpectrum s({0.0, 0.0, 2.0, 4.0}, 1.0, 0.5);
  EXPECT_NEAR(f_value(1.0, s), -1.0 / 6.0, 1e-15);
  const Complex w(0.7, 0.3);
  EXPECT_NEAR(std::abs(f_value(std::conj(w), s) - std::conj(f_value(w, s))), 0.0, 1e-15);
  EXPECT_THROW(f_value(2.0, s), NumericalError);
  EXPECT_THROW(f_value(0.0, s), NumericalError);
}

TEST(PhiValue, MarchenkoPasturClosedForm) {
  const auto s = mp_spectrum();
  EXPECT_NEAR(phi_value(0.5, s), 2.25, 1e-14);
  EXPECT_NEAR(phi_value(-0.5, s), 0.25, 1e-14);
  for (double w : {-3.0, -0.2, 0.1, 1.7, 5.0}) {
    EXPECT_NEAR(phi_value(w, s), (w + 0.25) * (w + 1.0) / w, 1e-13);
  }
  const Complex wc(0.3, 0.4);
  EXPECT_NEAR(std::abs(phi_value(wc, s) - (wc + 0.25) * (wc + 1.0) / wc), 0.0, 1e-13);
}

TEST(PhiPrime, MarchenkoPasturRootsAtHalf) {
  const auto s = mp_spectrum();
  EXPECT_NEAR(phi_prime(0.5, s), 0.0, 1e-14);
  EXPECT_NEAR(phi_prime(-0.5, s), 0.0, 1e-14);
  for (double w : {-2.0, 0.3, 1.2}) EXPECT_NEAR(phi_prime(w, s), 1.0 - 0.25 / (w * w), 1e-13);
}

TEST(PhiPrime, MatchesFiniteDifference) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> wd(-2.0, 15.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    for (int j = 0; j < 5; ++j) {
      const double w = wd(rng);
      double dist = std::abs(w);
      for (double g : r.gammas) dist = std::min(dist, std::abs(w - g));
      if (dist < 0.05) continue;
      const double h = 1e-6 * std::max(1.0, std::abs(w));
      const double fd = (phi_ref(w + h, r.gammas, r.s2, r.c) - phi_ref(w - h, r.gammas, r.s2, r.c)) / (2 * h);
      const double an = phi_prime(w, s);
      EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(an)));
    }
  }
}

TEST(PhiPrime, PositiveBelowFirstEdge) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const double w1 = positive_extrema(s).front().w;
    for (int j = 1; j <= 50; ++j) {
      const double w = w1 - j * (1.0 + std::abs(w1)) / 10.0;
      EXPECT_GT(phi_prime(w, s), 0.0);
    }
  }
}

TEST(ZerosOfPhi, StructureOnRandomSpectra) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto z = zeros_of_phi(s);
    ASSERT_EQ(static_cast<int>(z.size()), 2 * s.distinct_count() + 2);
    EXPECT_TRUE(std::is_sorted(z.begin(), z.end()));
    for (double w : z) EXPECT_NEAR(phi_ref(w, r.gammas, r.s2, r.c), 0.0, 1e-10 * s.scale());
    EXPECT_LT(z[0], 0.0);
    EXPECT_LT(z[1], 0.0);
    EXPECT_GT(z[2], 0.0);
    EXPECT_LT(z[3], s.distinct().front());
    for (int q = 1; q < s.distinct_count(); ++q) {
      EXPECT_GT(z[2 * q + 2], s.distinct()[q - 1]);
      EXPECT_LT(z[2 * q + 3], s.distinct()[q]);
    }
  }
}

TEST(PositiveExtrema, MarchenkoPastur) {
  const auto ex = positive_extrema(mp_spectrum());
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_NEAR(ex[0].w, -0.5, 1e-10);
  EXPECT_NEAR(ex[0].x, 0.25, 1e-12);
  EXPECT_EQ(ex[0].kind, Extremum::Kind::Max);
  EXPECT_NEAR(ex[1].w, 0.5, 1e-10);
  EXPECT_NEAR(ex[1].x, 2.25, 1e-12);
  EXPECT_EQ(ex[1].kind, Extremum::Kind::Min);
}

TEST(PositiveExtrema, FarSpikeGivesSecondClusterAroundIt) {
  std::vector<double> g(10, 0.0);
  g.back() = 40.0;
  const SignalSpectrum s(g, 1.0, 0.2);
  const auto p = support_clusters(s);
  ASSERT_EQ(p.q_count, 2);
  EXPECT_LT(p.clusters[1].w_minus, 40.0);
  EXPECT_GT(p.clusters[1].w_plus, 40.0);
  EXPECT_EQ(p.clusters[1].eig_indices, std::vector<int>{9});
}

TEST(PositiveExtrema, MatchesDenseScan) {
  std::mt19937_64 rng(24);
  int compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto ex = positive_extrema(s);
    const auto dense = dense_extrema(r);
    if (dense.size() != ex.size()) {
      ADD_FAILURE() << "extremum count " << ex.size() << " vs dense " << dense.size();
      continue;
    }
    ++compared;
    for (std::size_t i = 0; i < ex.size(); ++i) {
      EXPECT_NEAR(ex[i].w, dense[i], 1e-3 * (1.0 + std::abs(dense[i])));
      EXPECT_NEAR(ex[i].x, phi_ref(ex[i].w, r.gammas, r.s2, r.c), 1e-10 * s.scale());
    }
  }
  EXPECT_EQ(compared, 100);
}

TEST(PositiveExtrema, EvenCountAndOrderedOnManySpectra) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto ex = positive_extrema(s);
    ASSERT_EQ(ex.size() % 2, 0u);
    ASSERT_GE(ex.size(), 2u);
    ASSERT_LE(static_cast<int>(ex.size()), 2 * (s.distinct_count() + 1));
    for (std::size_t i = 0; i < ex.size(); ++i) {
      EXPECT_EQ(ex[i].kind, i % 2 == 0 ? Extremum::Kind::Max : Extremum::Kind::Min);
      EXPECT_GT(ex[i].x, 0.0);
      if (i > 0) {
        EXPECT_LT(ex[i - 1].w, ex[i].w);
        EXPECT_LT(ex[i - 1].x, ex[i].x);
      }
    }
  }
}

TEST(SupportClusters, MarchenkoPasturEdges) {
  for (double c : {0.1, 0.25, 0.5, 0.9}) {
    for (double s2 : {0.3, 1.0, 4.0}) {
      const auto p = support_clusters(mp_spectrum(6, s2, c));
      ASSERT_EQ(p.q_count, 1);
      EXPECT_NEAR(p.clusters[0].x_minus, s2 * std::pow(1.0 - std::sqrt(c), 2), 1e-9 * s2);
      EXPECT_NEAR(p.clusters[0].x_plus, s2 * std::pow(1.0 + std::sqrt(c), 2), 1e-9 * s2);
      EXPECT_TRUE(p.separated());
      EXPECT_TRUE(std::isinf(p.separation->t2_minus));
    }
  }
}

TEST(SupportClusters, EveryEigenvalueInExactlyOneCluster) {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 300; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto p = support_clusters(s);
    std::vector<int> seen(r.gammas.size(), 0);
    for (std::size_t q = 0; q < p.clusters.size(); ++q) {
      const auto& cl = p.clusters[q];
      EXPECT_LT(cl.x_minus, cl.x_plus);
      EXPECT_LT(cl.w_minus, cl.w_plus);
      EXPECT_GT(cl.x_minus, 0.0);
      EXPECT_NEAR(phi_ref(cl.w_minus, r.gammas, r.s2, r.c), cl.x_minus, 1e-10 * s.scale());
      EXPECT_NEAR(phi_ref(cl.w_plus, r.gammas, r.s2, r.c), cl.x_plus, 1e-10 * s.scale());
      if (q > 0) EXPECT_LE(p.clusters[q - 1].x_plus, cl.x_minus);
      for (int i : cl.eig_indices) {
        ++seen[static_cast<std::size_t>(i)];
        EXPECT_GT(r.gammas[static_cast<std::size_t>(i)], cl.w_minus);
        EXPECT_LT(r.gammas[static_cast<std::size_t>(i)], cl.w_plus);
      }
    }
    for (int v : seen) EXPECT_EQ(v, 1);
    if (p.separated()) {
      const auto& t = *p.separation;
      EXPECT_LT(t.t1_minus, p.clusters[0].x_minus);
      EXPECT_LT(p.clusters[0].x_plus, t.t1_plus);
      EXPECT_LT(t.t1_plus, t.t2_minus);
      if (p.q_count > 1) EXPECT_LT(t.t2_minus, p.clusters[1].x_minus);
      EXPECT_EQ(static_cast<int>(p.clusters[0].eig_indices.size()), s.zero_count());
    }
  }
}

TEST(SupportClusters, ExperimentOneSeparatedAtSixteenDb) {
  const auto s = exp1_spectrum(16.0);
  const auto p = support_clusters(s);
  EXPECT_TRUE(p.separated());
  EXPECT_GE(p.q_count, 2);
}

TEST(SupportClusters, TinySpikesAreAbsorbed) {
  std::vector<double> g(10, 0.0);
  g[8] = 0.01;
  g[9] = 0.02;
  const SignalSpectrum s(g, 1.0, 0.5);
  const auto p = support_clusters(s);
  EXPECT_FALSE(p.separated());
  ASSERT_EQ(p.q_count, 1);
  EXPECT_EQ(p.clusters[0].eig_indices.size(), 10u);
}

TEST(SupportClusters, LowSnrMergesClusters) {
  const auto p = support_clusters(exp1_spectrum(-20.0));
  EXPECT_FALSE(p.separated());
  EXPECT_EQ(p.q_count, 1);
}

TEST(SolveW, MarchenkoPasturExterior) {
  const auto s = mp_spectrum();
  const auto p = support_clusters(s);
  const auto v = solve_w(4.0, p, s);
  EXPECT_FALSE(v.inside_support);
  // (w + 0.25)(w + 1) = 4 w  =>  w^2 - 2.75 w + 0.25 = 0, larger root.
  const double expect = (2.75 + std::sqrt(2.75 * 2.75 - 1.0)) / 2.0;
  EXPECT_NEAR(v.w.real(), expect, 1e-12);
  EXPECT_EQ(v.w.imag(), 0.0);
}

TEST(SolveW, EdgesAndInterior) {
  const auto s = mp_spectrum();
  const auto p = support_clusters(s);
  EXPECT_NEAR(solve_w(p.clusters[0].x_plus, p, s).w.real(), p.clusters[0].w_plus, 1e-15);
  const auto mid = solve_w(0.5 * (p.clusters[0].x_minus + p.clusters[0].x_plus), p, s);
  EXPECT_TRUE(mid.inside_support);
  EXPECT_GT(mid.w.imag(), 0.0);
  EXPECT_THROW(solve_w(0.0, p, s), ValidationError);
  // Continuity just inside the upper edge.
  const double x = p.clusters[0].x_plus * (1.0 - 1e-10);
  EXPECT_NEAR(std::abs(solve_w(x, p, s).w - p.clusters[0].w_plus), 0.0, 1e-4);
}

TEST(SolveW, ExteriorBranchProperties) {
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto p = support_clusters(s);
    const double top = p.clusters.back().x_plus;
    std::uniform_real_distribution<double> xd(1e-3 * top, 2.0 * top);
    std::vector<std::pair<double, double>> samples;
    int taken = 0;
    while (taken < 100) {
      const double x = xd(rng);
      if (p.cluster_of(x) >= 0) continue;
      ++taken;
      const auto v = solve_w(x, p, s);
      EXPECT_FALSE(v.inside_support);
      const double w = v.w.real();
      EXPECT_NEAR(phi_ref(w, r.gammas, r.s2, r.c), x, 1e-10 * std::max(1.0, x));
      EXPECT_GT(phi_prime(w, s), 0.0);
      EXPECT_GT(u_ref(w, r.gammas, r.s2, r.c), 0.0);
      samples.emplace_back(x, w);
    }
    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 1; i < samples.size(); ++i) {
      EXPECT_LT(samples[i - 1].second, samples[i].second);
    }
  }
}

TEST(PhiLevelRoots, OneConjugatePairInside) {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto p = support_clusters(s);
    for (const auto& cl : p.clusters) {
      const double x = cl.x_minus + 0.37 * (cl.x_plus - cl.x_minus);
      const auto roots = phi_level_roots(x, s);
      ASSERT_EQ(static_cast<int>(roots.size()), 2 * (s.distinct_count() + 1));
      int complex_count = 0;
      for (const auto& w : roots) {
        if (std::abs(w.imag()) > 1e-8 * s.scale()) ++complex_count;
        EXPECT_LT(std::abs(phi_value(w, s) - x), 1e-8 * s.scale());
      }
      EXPECT_EQ(complex_count, 2);
      const auto v = solve_w(x, p, s);
      EXPECT_TRUE(v.inside_support);
      EXPECT_GT(v.w.imag(), 0.0);
    }
  }
}

TEST(Density, MarchenkoPasturClosedForm) {
  const double s2 = 1.0;
  const double c = 0.25;
  const auto s = mp_spectrum(4, s2, c);
  const auto p = support_clusters(s);
  for (int i = 1; i <= 50; ++i) {
    const double x = 0.25 + 2.0 * i / 51.0;
    EXPECT_NEAR(density(x, p, s), mp_density(x, s2, c), 1e-8);
  }
  EXPECT_EQ(density(0.1, p, s), 0.0);
  EXPECT_EQ(density(3.0, p, s), 0.0);
}

TEST(Density, OutsideSupportIsRealStieltjes) {
  const auto s = exp1_spectrum(16.0);
  const auto p = support_clusters(s);
  const double gap = 0.5 * (p.clusters[0].x_plus + p.clusters[1].x_minus);
  EXPECT_EQ(m_on_axis(gap, p, s).imag(), 0.0);
  // Near zero, m is real and positive.
  const Complex m0 = m_on_axis(1e-9 * p.clusters[0].x_minus, p, s);
  EXPECT_EQ(m0.imag(), 0.0);
  EXPECT_GT(m0.real(), 0.0);
  EXPECT_THROW(m_on_axis(p.clusters[0].x_minus, p, s), NumericalError);
}

TEST(Density, NonNegativeAndNormalized) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    const auto p = support_clusters(s);
    double total = 0.0;
    for (const auto& cl : p.clusters) {
      total += cluster_mass(cl, s);
      for (int i = 1; i < 20; ++i) {
        EXPECT_GE(density(cl.x_minus + (cl.x_plus - cl.x_minus) * i / 20.0, p, s), 0.0);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_NEAR(cumulative_mass(2.0 * p.clusters.back().x_plus, p, s), 1.0, 1e-6);
  }
}

TEST(Density, StieltjesMatchesCanonicalEquation) {
  const auto s = exp1_spectrum(16.0);
  const auto p = support_clusters(s);
  for (const auto& cl : p.clusters) {
    for (int i = 1; i < 10; ++i) {
      const double x = cl.x_minus + (cl.x_plus - cl.x_minus) * i / 10.0;
      const Complex m = m_on_axis(x, p, s);
      // m = (1/M) sum 1 / (gamma / (1 + a m) - x (1 + a m) + s2 (1 - c)).
      const double a = s.sigma2() * s.c();
      const Complex op = 1.0 + a * m;
      Complex h = 0.0;
      for (double g : s.gammas()) h += 1.0 / (g / op - x * op + s.sigma2() * (1.0 - s.c()));
      h /= static_cast<double>(s.m());
      EXPECT_LT(std::abs(h - m), 1e-9 * std::max(1.0, std::abs(m)));
    }
  }
}

TEST(ClusterMass, MarchenkoPasturIsOne) {
  const auto s = mp_spectrum();
  EXPECT_NEAR(cluster_mass(support_clusters(s).clusters[0], s), 1.0, 1e-8);
}

TEST(ClusterMass, IsolatedSpikeCarriesOneOverM) {
  std::vector<double> g(10, 0.0);
  g.back() = 40.0;
  const SignalSpectrum s(g, 1.0, 0.2);
  const auto p = support_clusters(s);
  ASSERT_EQ(p.q_count, 2);
  EXPECT_NEAR(cluster_mass(p.clusters[1], s), 0.1, 1e-5);
  EXPECT_NEAR(cluster_mass(p.clusters[0], s), 0.9, 1e-5);
}

TEST(ClusterMass, ExperimentOneNoiseCluster) {
  const auto s = exp1_spectrum(16.0);
  const auto p = support_clusters(s);
  EXPECT_NEAR(cluster_mass(p.clusters[0], s), 18.0 / 20.0, 1e-5);
}

TEST(CanonicalM, FarFromAxis) {
  const auto s = exp1_spectrum(16.0);
  const Complex m = canonical_m(Complex(0.0, 1e6), s);
  EXPECT_NEAR(std::abs(Complex(0.0, -1e6) * m), 1.0, 0.01);
  EXPECT_GT(m.imag(), 0.0);
}

TEST(CanonicalM, MarchenkoPasturClosedForm) {
  const double s2 = 0.7;
  const double c = 0.35;
  const auto s = mp_spectrum(5, s2, c);
  for (const Complex z : {Complex(1.0, 0.5), Complex(0.2, 0.01), Complex(-1.0, 2.0),
                          Complex(1.5, -0.3), Complex(3.0, 1e-3)}) {
    const Complex m = canonical_m(z, s);
    EXPECT_LT(std::abs(m - mp_stieltjes(z, s2, c)), 1e-9) << z;
  }
}

TEST(CanonicalM, StieltjesBoundsAndConjugation) {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = random_spectrum(rng);
    const SignalSpectrum s(r.gammas, r.s2, r.c);
    std::uniform_real_distribution<double> xd(-1.0, 20.0);
    std::uniform_real_distribution<double> yd(-3.0, 1.0);
    const Complex z(xd(rng), std::pow(10.0, yd(rng)));
    const Complex m = canonical_m(z, s);
    EXPECT_GT(m.imag(), 0.0);
    EXPECT_LE(std::abs(m), 1.0 / z.imag() * (1 + 1e-9));
    EXPECT_LT(std::abs(canonical_m(std::conj(z), s) - std::conj(m)), 1e-14);
  }
  EXPECT_THROW(canonical_m(Complex(1.0, 0.0), mp_spectrum()), ValidationError);
}

TEST(CanonicalM, ApproachesAxisValue) {
  std::vector<double> g(10, 0.0);
  g[8] = 5.0;
  g[9] = 9.0;
  const SignalSpectrum s(g, 1.0, 0.3);
  const auto p = support_clusters(s);
  int checked = 0;
  for (const auto& cl : p.clusters) {
    for (int i = 1; i <= 10; ++i) {
      const double x = cl.x_minus + (cl.x_plus - cl.x_minus) * (i - 0.5) / 10.0;
      EXPECT_LT(std::abs(canonical_m(Complex(x, 1e-6), s) - m_on_axis(x, p, s)), 1e-4) << x;
      ++checked;
    }
  }
  EXPECT_GE(checked, 20);
}

TEST(TMatrix, NoiselessLimitIsResolvent) {
  std::vector<double> angles = {-10.0, 20.0};
  ArrayScenario sc;
  sc.m = 6;
  sc.n = 12;
  sc.k = 2;
  sc.angles_deg = angles;
  sc.master_seed = 4;
  const CMatrix b = signal_matrix(sc, generate_sources(sc));
  const auto s = SignalSpectrum::from_signal(b, 2, 1e-12, 0.5);
  const CVector v = steering_vector(5.0, 6);
  const Complex z(0.3, 0.2);
  const CMatrix r = b * b.adjoint() - z * CMatrix::Identity(6, 6);
  const Complex expect = v.dot(r.partialPivLu().solve(v));
  EXPECT_LT(std::abs(t_matrix_diag(z, b, s, v) - expect), 1e-9);
}

TEST(TMatrix, BoundedByImaginaryPart) {
  ArrayScenario sc;
  sc.m = 8;
  sc.n = 20;
  sc.k = 2;
  sc.angles_deg = {0.0, 30.0};
  sc.master_seed = 6;
  const CMatrix b = signal_matrix(sc, generate_sources(sc));
  const auto s = SignalSpectrum::from_signal(b, 2, 0.5, 0.4);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    CVector v(8);
    for (int j = 0; j < 8; ++j) v[j] = Complex(nd(rng), nd(rng));
    const Complex z(nd(rng), 0.1 + std::abs(nd(rng)));
    EXPECT_LE(std::abs(t_matrix_diag(z, b, s, v)), v.squaredNorm() / z.imag() * (1 + 1e-9));
  }
}
