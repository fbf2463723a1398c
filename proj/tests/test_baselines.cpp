#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oddm/baselines.hpp"

using namespace oddm;

namespace {
Mat random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
  Mat a(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) a(i, j) = cplx(gauss(rng), gauss(rng));
  return a;
}
}  // namespace

TEST_CASE("pursuit recovers a single scaled column", "[baselines]") {
  std::mt19937_64 rng(51);
  Mat a = random_matrix(16, 24, rng);
  Vec y = cplx(3.0, 0.0) * a.col(7);
  OmpConfig cfg;
  cfg.sparsity = 4;
  cfg.residual_tol = 1e-12;
  auto r = omp_estimate(a, y, cfg);
  REQUIRE(r.support.front() == 7);
  REQUIRE(std::abs(r.estimate[7] - cplx(3.0, 0.0)) < 1e-10);
  REQUIRE(r.residual_norms.back() < 1e-10 * y.norm());
}

TEST_CASE("pursuit on a zero observation does nothing", "[baselines]") {
  std::mt19937_64 rng(52);
  Mat a = random_matrix(8, 12, rng);
  auto r = omp_estimate(a, Vec::Zero(8), OmpConfig{4, 0.0});
  REQUIRE(r.support.empty());
  REQUIRE(r.estimate.norm() == 0.0);
}

TEST_CASE("noiseless sparse recovery is exact", "[baselines]") {
  std::mt19937_64 rng(53);
  Mat a = random_matrix(64, 128, rng);
  Vec h = Vec::Zero(128);
  std::vector<int> idx(128);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 8; ++i) h[idx[i]] = cplx(gauss(rng), gauss(rng));
  Vec y = a * h;
  auto r = omp_estimate(a, y, OmpConfig{8, 0.0});
  REQUIRE((r.estimate - h).squaredNorm() / h.squaredNorm() < 1e-20);
  // support is duplicate-free
  std::vector<int> s = r.support;
  std::sort(s.begin(), s.end());
  REQUIRE(std::adjacent_find(s.begin(), s.end()) == s.end());
}

TEST_CASE("pursuit residual never increases", "[baselines]") {
  std::mt19937_64 rng(54);
  Mat a = random_matrix(32, 64, rng);
  Vec y(32);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 32; ++i) y[i] = cplx(gauss(rng), gauss(rng));
  auto r = omp_estimate(a, y, OmpConfig{16, 0.0});
  for (std::size_t i = 1; i < r.residual_norms.size(); ++i)
    REQUIRE(r.residual_norms[i] <= r.residual_norms[i - 1] + 1e-12);
}

TEST_CASE("linear MMSE matches the scalar formula", "[baselines]") {
  Mat a(1, 1);
  a(0, 0) = cplx(2.0, 0.0);
  Vec y(1);
  y[0] = cplx(1.0, 0.0);
  // h = v a* y / (v |a|^2 + d2) = 1*2*1 / (4 + 1)
  Vec h = lmmse_oracle(a, y, 1.0, 1.0);
  REQUIRE(std::abs(h[0] - cplx(0.4, 0.0)) < 1e-14);
}

TEST_CASE("linear MMSE approaches least squares as noise vanishes", "[baselines]") {
  std::mt19937_64 rng(55);
  Mat a = random_matrix(24, 16, rng);  // overdetermined
  Vec h(16);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 16; ++i) h[i] = cplx(gauss(rng), gauss(rng));
  Vec y = a * h;
  Vec ls = lmmse_oracle(a, y, 1.0, 0.0);
  REQUIRE((ls - h).norm() < 1e-10 * h.norm());
  Vec near = lmmse_oracle(a, y, 1.0, 1e-10);
  REQUIRE((near - h).norm() < 1e-4 * h.norm());
}

TEST_CASE("support-restricted MMSE is exact without noise", "[baselines]") {
  std::mt19937_64 rng(56);
  Mat a = random_matrix(32, 64, rng);
  Vec h = Vec::Zero(64);
  h[5] = cplx(1.0, -1.0);
  h[40] = cplx(-0.5, 2.0);
  Vec y = a * h;
  Vec est = genie_lmmse(a, y, {5, 40}, 1.0, 0.0);
  REQUIRE((est - h).norm() < 1e-10 * h.norm());
  // off-support entries stay zero even with noise
  Vec est2 = genie_lmmse(a, y, {5, 40}, 1.0, 0.01);
  for (int i = 0; i < 64; ++i)
    if (i != 5 && i != 40) REQUIRE(est2[i] == cplx(0.0, 0.0));
}

TEST_CASE("baseline solvers report their dense work", "[baselines]") {
  std::mt19937_64 rng(57);
  Mat a = random_matrix(16, 32, rng);
  Vec y = a.col(3);
  ops::reset();
  omp_estimate(a, y, OmpConfig{2, 0.0});
  REQUIRE(ops::dense_factorizations.load() > 0);
  ops::reset();
  lmmse_oracle(a, y, 1.0, 0.1);
  REQUIRE(ops::dense_factorizations.load() == 1);
  REQUIRE(ops::dense_solves.load() == 1);
}

TEST_CASE("scalar equalizer detects noiseless symbols", "[baselines]") {
  std::mt19937_64 rng(58);
  const int n = 256;
  const double amp = 1.0 / std::sqrt(2.0);
  Vec x(n), ch(n), y(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> bit(0, 1);
  for (int i = 0; i < n; ++i) {
    x[i] = cplx(bit(rng) ? amp : -amp, bit(rng) ? amp : -amp);
    ch[i] = cplx(gauss(rng), gauss(rng));
    y[i] = ch[i] * x[i];
  }
  Vec decided = qam4_equalize(y, ch, 0.0);
  REQUIRE(symbol_error_rate(decided, x) == 0.0);
}

TEST_CASE("symbol error rate counts mismatches", "[baselines]") {
  const double amp = 1.0 / std::sqrt(2.0);
  Vec a(2), b(2);
  a[0] = cplx(amp, amp);
  a[1] = cplx(amp, -amp);
  b[0] = cplx(amp, amp);
  b[1] = cplx(-amp, -amp);
  REQUIRE(symbol_error_rate(a, b) == Catch::Approx(0.5));
  REQUIRE_THROWS_AS(symbol_error_rate(a, Vec::Zero(3)), std::invalid_argument);
}
