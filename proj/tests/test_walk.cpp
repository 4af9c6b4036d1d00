#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "dpre/error.hpp"
#include "dpre/lattice.hpp"
#include "dpre/rng.hpp"
#include "dpre/walk.hpp"
#include "oracles.hpp"

using namespace dpre;

TEST_CASE("kernel values") {
  const auto k = walk::build_kernel(2, 8);
  CHECK(k.prob(1, LatticePoint{1, 0}) == 0.25);
  CHECK(k.prob(2, LatticePoint{0, 0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(k.prob(3, LatticePoint{0, 0}) == 0.0);
  // 16 two-step walks, 4 of them return.
  int back = 0;
  for (const auto& p : oracle::all_paths(2, 2, LatticePoint::origin(2))) back += p[2] == LatticePoint::origin(2);
  CHECK(back == 4);
}

TEST_CASE("kernel agrees with map-based convolution") {
  for (int d : {1, 2, 3}) {
    const int n = d == 3 ? 8 : 14;
    const auto k = walk::build_kernel(d, n);
    const auto ref = oracle::kernel_maps(d, n);
    for (int j = 1; j <= n; ++j) {
      double s = 0.0;
      Box::around(LatticePoint::origin(d), j + 1).for_each([&](const LatticePoint& y) {
        CHECK(k.prob(j, y) == doctest::Approx(oracle::kernel_at(ref, j, y)).epsilon(1e-14));
        s += k.prob(j, y);
      });
      CHECK(s == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("parity support and Chapman-Kolmogorov") {
  const auto k = walk::build_kernel(2, 16);
  for (int j = 1; j <= 16; ++j)
    Box::around(LatticePoint::origin(2), j).for_each([&](const LatticePoint& y) {
      if ((coord_sum(y) + j) % 2 != 0) CHECK(k.prob(j, y) == 0.0);
    });
  for (int a = 1; a <= 8; ++a)
    for (int b = 1; b <= 8; ++b)
      for (const LatticePoint y : {LatticePoint{0, 0}, LatticePoint{1, 1}, LatticePoint{3, -1}, LatticePoint{2, 0}}) {
        double s = 0.0;
        Box::around(LatticePoint::origin(2), a).for_each([&](const LatticePoint& w) { s += k.prob(a, w) * k.prob(b, w, y); });
        CHECK(std::abs(k.prob(a + b, y) - s) <= 1e-10);
      }
}

TEST_CASE("return probabilities") {
  // Enumeration: 16 walks for i = 1, 256 walks for i = 2.
  for (int i : {1, 2}) {
    const auto paths = oracle::all_paths(2, 2 * i, LatticePoint::origin(2));
    int back = 0;
    for (const auto& p : paths) back += p.back() == LatticePoint::origin(2);
    CHECK(walk::return_probability(2, i) == doctest::Approx(static_cast<double>(back) / paths.size()).epsilon(1e-14));
  }
  CHECK(walk::return_probability(2, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(walk::return_probability(2, 2) == doctest::Approx(9.0 / 64.0).epsilon(1e-15));
  // Local limit theorem: i pi r_i -> 1.
  CHECK(10000 * M_PI * walk::return_probability(2, 10000) == doctest::Approx(1.0).epsilon(0.01));
  // Closed form against the kernel DP.
  for (int d : {1, 2, 3}) {
    const auto k = walk::build_kernel(d, 100);
    for (int i = 1; i <= 50; ++i)
      CHECK(std::abs(walk::return_probability(d, i) - k.prob(2 * i, LatticePoint::origin(d))) <= 1e-12);
  }
  const auto r = walk::return_probabilities(2, 300);
  CHECK(r[0] == 1.0);
  for (int i = 1; i <= 300; ++i) CHECK(r[static_cast<std::size_t>(i)] == doctest::Approx(oracle::return_prob_closed(2, i)).epsilon(1e-12));
  const auto r1 = walk::return_probabilities(1, 300);
  for (int i = 1; i <= 300; ++i) CHECK(r1[static_cast<std::size_t>(i)] == doctest::Approx(oracle::return_prob_closed(1, i)).epsilon(1e-12));
}

TEST_CASE("sample_path") {
  const auto p0 = walk::sample_path(2, 0, 3);
  CHECK(p0.length() == 0);
  CHECK(p0[0] == LatticePoint::origin(2));
  const auto a = walk::sample_path(2, 50, 17);
  const auto b = walk::sample_path(2, 50, 17);
  CHECK(a.positions() == b.positions());
  for (int i = 1; i <= 50; ++i) CHECK(l1_distance(a[i], a[i - 1]) == 1);

  std::vector<double> x, y;
  for (int s = 0; s < 10000; ++s) {
    const auto p = walk::sample_path(2, 100, rng::task_seed(1, s));
    x.push_back(p.end()[0]);
    y.push_back(p.end()[1]);
  }
  CHECK(std::abs(oracle::mean(x)) <= 4 * oracle::std_error(x));
  CHECK(std::abs(oracle::mean(y)) <= 4 * oracle::std_error(y));

  std::vector<double> back;
  for (int s = 0; s < 100000; ++s) back.push_back(walk::sample_path(2, 2, rng::task_seed(2, s)).end() == LatticePoint::origin(2));
  CHECK(std::abs(oracle::mean(back) - 0.25) <= 4 * oracle::std_error(back));

  CHECK_THROWS_AS(walk::WalkPath({LatticePoint{0, 0}, LatticePoint{2, 0}}), PreconditionError);
}

TEST_CASE("overlap counts") {
  const auto p = walk::sample_path(2, 30, 4);
  CHECK(walk::overlap_count(p, p) == 30);
  // Two paths moving in opposite x directions never meet after time 0.
  std::vector<LatticePoint> up, down;
  for (int i = 0; i <= 10; ++i) {
    up.push_back(LatticePoint{i, 0});
    down.push_back(LatticePoint{-i, 0});
  }
  CHECK(walk::overlap_count(walk::WalkPath(up), walk::WalkPath(down)) == 0);
  CHECK_THROWS_AS(walk::overlap_count(walk::sample_path(2, 3, 1), walk::sample_path(2, 4, 1)), PreconditionError);

  std::vector<double> I;
  for (int s = 0; s < 10000; ++s)
    I.push_back(static_cast<double>(
        walk::overlap_count(walk::sample_path(2, 50, rng::task_seed(5, s)), walk::sample_path(2, 50, rng::task_seed(6, s)))));
  double expect = 0.0;
  for (int i = 1; i <= 50; ++i) expect += oracle::return_prob_closed(2, i);
  CHECK(std::abs(oracle::mean(I) - expect) <= 4 * oracle::std_error(I));

  // P(S_i = S'_i) = P(S_{2i} = 0) for i <= 20.
  const int M = 20000;
  std::vector<std::vector<double>> hit(21);
  for (int s = 0; s < M; ++s) {
    const auto a = walk::sample_path(2, 20, rng::task_seed(7, s));
    const auto b = walk::sample_path(2, 20, rng::task_seed(8, s));
    for (int i = 1; i <= 20; ++i) hit[static_cast<std::size_t>(i)].push_back(a[i] == b[i]);
  }
  for (int i = 1; i <= 20; ++i) {
    const auto& h = hit[static_cast<std::size_t>(i)];
    CHECK(std::abs(oracle::mean(h) - oracle::return_prob_closed(2, i)) <= 4 * oracle::std_error(h));
  }
}

TEST_CASE("box hitting probabilities") {
  const auto k1 = walk::build_kernel(2, 1);
  const BoxSpec s1(1, 2);
  CHECK(walk::box_hit_prob(k1, LatticePoint{0, 0}, s1, LatticePoint{0, 0}) == doctest::Approx(1.0).epsilon(1e-15));

  const auto k = walk::build_kernel(2, 16);
  const BoxSpec s(16, 2);
  for (const LatticePoint x : {LatticePoint{0, 0}, LatticePoint{3, -2}, LatticePoint{4, 4}}) {
    double total = 0.0;
    Box::around(LatticePoint::origin(2), 4).for_each([&](const LatticePoint& z) { total += walk::box_hit_prob(k, x, s, z); });
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(walk::box_hit_prob(k, LatticePoint{0, 0}, s, LatticePoint{3, 0}) <
        walk::box_hit_prob(k, LatticePoint{0, 0}, s, LatticePoint{1, 0}));
  // Direct summation of the kernel over the block.
  double direct = 0.0;
  s.range(LatticePoint{1, 0}).for_each([&](const LatticePoint& y) { direct += k.prob(16, LatticePoint{0, 0}, y); });
  CHECK(walk::box_hit_prob(k, LatticePoint{0, 0}, s, LatticePoint{1, 0}) == doctest::Approx(direct).epsilon(1e-14));
  CHECK_THROWS_AS(walk::box_hit_prob(walk::build_kernel(2, 8), LatticePoint{0, 0}, s, LatticePoint{0, 0}), PreconditionError);
}

TEST_CASE("kernel persistence and truncation") {
  const auto k = walk::build_kernel(2, 20);
  const auto path = (std::filesystem::temp_directory_path() / "dpre_test_kernel.bin").string();
  k.save(path);
  const auto back = walk::KernelTable::load(path);
  std::filesystem::remove(path);
  for (int j = 1; j <= 20; ++j)
    Box::around(LatticePoint::origin(2), j).for_each([&](const LatticePoint& y) { CHECK(back.prob(j, y) == k.prob(j, y)); });

  walk::KernelOptions opt;
  opt.truncate = true;
  opt.truncation_c = 1.0;
  const auto t = walk::build_kernel(2, 64, opt);
  for (int j = 1; j <= 64; ++j) CHECK(t.slice_sum(j) + t.truncated_mass(j) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.truncated_mass(64) > 0.0);
  CHECK(walk::build_kernel(2, 64).truncated_mass(64) == 0.0);
}
