#include <doctest.h>

#include <cmath>

#include "regimescan/baselines.hpp"
#include "regimescan/errors.hpp"
#include "regimescan/rng.hpp"

using namespace regimescan;

namespace {

Vec vec1(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

std::vector<Vec> step_series(int n_left, double left, int n_right, double right) {
  std::vector<Vec> s;
  for (int i = 0; i < n_left; ++i) s.push_back(vec1(left));
  for (int i = 0; i < n_right; ++i) s.push_back(vec1(right));
  return s;
}

std::vector<Vec> random_series(Rng& rng, int n, int d) {
  std::vector<Vec> s;
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < n; ++i) {
    if (i > 0 && rng.uniform() < 0.1)  // occasional genuine level shift
      for (int j = 0; j < d; ++j) mean(j) += rng.uniform(-3.0, 3.0);
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = mean(j) + 0.3 * rng.normal();
    s.push_back(x);
  }
  return s;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("a clean level shift is segmented exactly at the jump") {
  const SegmentationResult r = pelt_segment(step_series(20, 0.0, 20, 5.0), 1.0);
  REQUIRE(r.breakpoints == std::vector<int>{20});
  REQUIRE(r.segment_means.size() == 2);
  CHECK(r.segment_means[0](0) == doctest::Approx(0.0));
  CHECK(r.segment_means[1](0) == doctest::Approx(5.0));
  CHECK(r.total_cost == doctest::Approx(1.0));  // zero residual plus one penalty

  // A penalty larger than the separation suppresses the split.
  const SegmentationResult flat = pelt_segment(step_series(20, 0.0, 20, 5.0), 1e6);
  CHECK(flat.breakpoints.empty());
  REQUIRE(flat.segment_means.size() == 1);
  CHECK(flat.segment_means[0](0) == doctest::Approx(2.5));
}

TEST_CASE("pruned and exhaustive dynamic programs agree everywhere") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(rng.index(38));
    const int d = 1 + static_cast<int>(rng.index(3));
    const std::vector<Vec> series = random_series(rng, n, d);
    const double psi =
        trial % 3 == 0 ? default_pelt_penalty(series) : std::exp(rng.uniform(-1.0, 3.0));
    const SegmentationResult a = pelt_segment(series, psi);
    const SegmentationResult b = exhaustive_segment(series, psi);
    CHECK(a.breakpoints == b.breakpoints);
    CHECK(a.total_cost == doctest::Approx(b.total_cost).epsilon(1e-10));
  }
}

TEST_CASE("default penalty follows the robust dispersion formula") {
  const std::vector<Vec> s = {vec1(0.0), vec1(0.0), vec1(4.0), vec1(10.0)};
  // componentwise median 2, squared deviations (4, 4, 4, 64), median 4
  CHECK(default_pelt_penalty(s) == doctest::Approx(2.0 * 1.0 * std::log(4.0) * 4.0));

  const std::vector<Vec> constant(10, vec1(3.0));
  CHECK(default_pelt_penalty(constant) ==
        doctest::Approx(2.0 * std::log(10.0) * 1e-12));  // dispersion floored

  CHECK_THROWS_AS(pelt_segment(step_series(20, 0.0, 20, 5.0), 0.0), ConfigError);
  CHECK_THROWS_AS(pelt_segment({vec1(1.0)}, 1.0), ConfigError);
  CHECK_THROWS_AS(default_pelt_penalty({}), ConfigError);
}

TEST_CASE("mixture fit separates two tight clusters") {
  Rng rng(5);
  std::vector<double> values;
  for (int i = 0; i < 50; ++i) values.push_back(0.0 + 0.05 * rng.normal());
  for (int i = 0; i < 50; ++i) values.push_back(5.0 + 0.05 * rng.normal());

  const Gmm1d fit = gmm_em_1d(values, 2, 200, 17);
  REQUIRE(fit.means.size() == 2);
  const double lo = std::min(fit.means(0), fit.means(1));
  const double hi = std::max(fit.means(0), fit.means(1));
  CHECK(std::abs(lo - 0.0) <= 0.05);
  CHECK(std::abs(hi - 5.0) <= 0.05);
  CHECK(fit.weights.minCoeff() >= 0.4);
  CHECK(fit.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(fit.variance_floored);
  REQUIRE(fit.posteriors.rows() == 100);
  // Sharp assignment: each point almost fully owned by one component.
  CHECK(fit.posteriors.rowwise().maxCoeff().minCoeff() > 0.999);

  for (size_t i = 1; i < fit.loglik_trace.size(); ++i)
    CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-8);

  const Gmm1d again = gmm_em_1d(values, 2, 200, 17);
  CHECK((fit.means - again.means).norm() == 0.0);
  const Gmm1d other = gmm_em_1d(values, 2, 200, 18);
  CHECK(std::abs(std::min(other.means(0), other.means(1)) - lo) <= 0.05);
}

TEST_CASE("mixture fit survives constant data by flooring the variance") {
  const std::vector<double> constant(20, 3.0);
  const Gmm1d fit = gmm_em_1d(constant, 2, 50, 1);
  CHECK(fit.variance_floored);
  CHECK(std::isfinite(fit.loglik_trace.back()));
  CHECK(fit.means.allFinite());
  CHECK(fit.variances.minCoeff() > 0.0);

  CHECK_THROWS_AS(gmm_em_1d({1.0, 2.0}, 0, 50, 1), ConfigError);
  CHECK_THROWS_AS(gmm_em_1d({1.0}, 2, 50, 1), ConfigError);
}

TEST_CASE("three-point inconsistency: analytic probabilities") {
  // Uniform responsibilities over two components: every triple keeps
  // 2 * 0.5^3, so the probability is 0.75 at every node.
  std::vector<Mat> uniform = {Mat::Constant(10, 2, 0.5)};
  const ChangeProbability u = changepoint_probability(uniform, 0.0, 1.0, -1);
  for (Eigen::Index t = 0; t < 10; ++t) CHECK(u.p(t) == doctest::Approx(0.75));

  // Hard assignment switching components at index 5: probability one exactly
  // at the two nodes whose triple straddles the switch, zero elsewhere.
  Mat hard = Mat::Zero(10, 2);
  for (int t = 0; t < 10; ++t) hard(t, t < 5 ? 0 : 1) = 1.0;
  const ChangeProbability h = changepoint_probability({hard}, 2.0, 0.5, -1);
  for (int t = 0; t < 10; ++t) {
    const double expected = (t == 4 || t == 5) ? 1.0 : 0.0;
    CHECK(h.p(t) == doctest::Approx(expected));
  }
  // The two adjacent hits merge into one reported peak.
  REQUIRE(h.peak_indices.size() == 1);
  CHECK(h.peak_indices[0] == 4);
  CHECK(h.peak_times[0] == doctest::Approx(2.0 + 0.5 * 4));
  REQUIRE(h.intervals.size() == 1);
  CHECK(h.intervals[0].first >= 2.0 + 0.5 * 1);
  CHECK(h.intervals[0].second <= 2.0 + 0.5 * 7);

  // A constant hard assignment has no change anywhere.
  Mat flat = Mat::Zero(10, 2);
  for (int t = 0; t < 10; ++t) flat(t, 0) = 1.0;
  CHECK(changepoint_probability({flat}, 0.0, 1.0, -1).peak_indices.empty());

  // max_peaks trims to the tallest.
  const ChangeProbability top = changepoint_probability({hard}, 0.0, 1.0, 1);
  CHECK(top.peak_indices.size() == 1);

  CHECK_THROWS_AS(changepoint_probability({}, 0.0, 1.0, -1), ConfigError);
  CHECK_THROWS_AS(changepoint_probability({Mat::Constant(2, 2, 0.5)}, 0.0, 1.0, -1),
                  ConfigError);
  CHECK_THROWS_AS(changepoint_probability({Mat::Constant(10, 2, 0.5), Mat::Constant(9, 2, 0.5)},
                                          0.0, 1.0, -1),
                  ConfigError);
}

}  // TEST_SUITE
