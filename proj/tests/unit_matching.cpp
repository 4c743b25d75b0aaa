#include <doctest.h>

#include <cmath>
#include <fstream>

#include "pf/matching.hpp"
#include "pf/rng.hpp"
#include "test_util.hpp"

using namespace pf;

namespace {

// Random touching-prone boxes plus unit descriptors giving an appearance
// matrix with an exact 1.0 diagonal.
struct Instance {
  ProposalSet R, Rp;
  Matrix A;
};

Instance identity_instance(std::uint64_t seed, int n, double w = 100,
                           double h = 100) {
  Rng rng(seed);
  std::vector<Box> boxes;
  for (int i = 0; i < n; ++i) boxes.push_back(testutil::random_box(rng, w, h, 10));
  Instance inst;
  inst.R = testutil::make_set(static_cast<int>(w), static_cast<int>(h), boxes);
  inst.Rp = inst.R;
  DescriptorSet d;
  d.kind = DescriptorKind::dense;
  d.dim = 8;
  for (int i = 0; i < n; ++i) {
    double norm = 0;
    std::vector<double> row(8);
    for (double& v : row) {
      v = rng.uniform(-1, 1);
      norm += v * v;
    }
    for (double& v : row) d.data.push_back(v / std::sqrt(norm));
  }
  inst.A = appearance_matrix(d, d);
  return inst;
}

}  // namespace

TEST_SUITE("matching") {

TEST_CASE("gauss_kernel basics") {
  KernelBandwidths bw{10, 0.5};
  CHECK(gauss_kernel({0, 0, 0}, bw) == doctest::Approx(1.0));
  CHECK(gauss_kernel({10, 0, 0}, bw) == doctest::Approx(std::exp(-0.5)));
  CHECK(gauss_kernel({0, 0, 0.5}, bw) == doctest::Approx(std::exp(-0.5)));
  CHECK(gauss_kernel({3, -4, 0}, bw) == gauss_kernel({-3, 4, 0}, bw));
  CHECK(KernelBandwidths::defaults(200, 100).sigma_xy == doctest::Approx(20));
  CHECK(KernelBandwidths::defaults(200, 100).sigma_s == doctest::Approx(0.5));
}

TEST_CASE("appearance_matrix diagonal and spot checks") {
  Instance inst = identity_instance(5, 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(inst.A.at(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 0; j < 10; ++j)
      if (j != i) CHECK(inst.A.at(i, i) > inst.A.at(i, j));
  }
  DescriptorSet single;
  single.kind = DescriptorKind::dense;
  single.dim = 2;
  single.data = {1, 0};
  Matrix one = appearance_matrix(single, single);
  CHECK(one.rows == 1);
  CHECK(one.cols == 1);
  CHECK(one.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("appearance_matrix agrees with appearance_prob elementwise") {
  Rng rng(8);
  DescriptorSet f, g;
  f.kind = g.kind = DescriptorKind::dense;
  f.dim = g.dim = 5;
  for (int i = 0; i < 4 * 5; ++i) f.data.push_back(rng.uniform(-1, 1));
  for (int i = 0; i < 6 * 5; ++i) g.data.push_back(rng.uniform(-1, 1));
  Matrix A = appearance_matrix(f, g);
  CHECK(A.at(2, 3) == doctest::Approx(appearance_prob(f, 2, g, 3)).epsilon(1e-12));
  CHECK(A.at(0, 5) == doctest::Approx(appearance_prob(f, 0, g, 5)).epsilon(1e-12));
}

TEST_CASE("nam identity, tie-break, argmax invariance") {
  Instance inst = identity_instance(6, 12);
  Assignment asg = nam(inst.R, inst.Rp, inst.A);
  CHECK(asg.strategy == "nam");
  for (int i = 0; i < 12; ++i) {
    CHECK(asg.matches[i].src_id == i);
    CHECK(asg.matches[i].tgt_id == i);
    CHECK(asg.matches[i].geometric == doctest::Approx(1.0));
  }

  ProposalSet r1 = testutil::make_set(50, 50, {{0, 0, 20, 20}});
  ProposalSet r3 = testutil::make_set(
      50, 50, {{0, 0, 20, 20}, {10, 10, 30, 30}, {20, 20, 40, 40}});
  Matrix row = testutil::make_matrix(1, 3, {0.2, 0.9, 0.9});
  CHECK(nam(r1, r3, row).matches[0].tgt_id == 1);

  Matrix squared = row;
  for (double& v : squared.data) v = v * v;
  CHECK(nam(r1, r3, squared).matches[0].tgt_id == 1);
}

TEST_CASE("hough_histogram mass and peak structure") {
  SUBCASE("single pair is unimodal at the pair offset") {
    ProposalSet r = testutil::make_set(100, 100, {{10, 10, 30, 30}});
    ProposalSet rp = testutil::make_set(100, 100, {{20, 15, 40, 35}});
    Matrix A = testutil::make_matrix(1, 1, {0.8});
    HoughHistogram h = hough_histogram(r, rp, A);
    CHECK(h.total_mass() == doctest::Approx(0.8).epsilon(1e-9));
    // peak bin holds the offset (-10, -5, 0)
    int best = 0;
    for (size_t b = 1; b < h.h.size(); ++b)
      if (h.h[b] > h.h[best]) best = static_cast<int>(b);
    int bs = best % h.bs, by = (best / h.bs) % h.by, bx = best / (h.bs * h.by);
    CHECK(std::abs(h.center_x(bx) - (-10)) <= h.x_width);
    CHECK(std::abs(h.center_y(by) - (-5)) <= h.y_width);
    CHECK(std::abs(h.center_s(bs) - 0) <= h.s_width);
  }
  SUBCASE("identity sets concentrate mass at the zero-offset bin") {
    Instance inst = identity_instance(9, 14);
    HoughHistogram h = hough_histogram(inst.R, inst.Rp, inst.A);
    double sumA = 0;
    for (double v : inst.A.data) sumA += v;
    CHECK(h.total_mass() == doctest::Approx(sumA).epsilon(1e-6));
    int best = 0;
    for (size_t b = 1; b < h.h.size(); ++b)
      if (h.h[b] > h.h[best]) best = static_cast<int>(b);
    int bs = best % h.bs, by = (best / h.bs) % h.by, bx = best / (h.bs * h.by);
    CHECK(std::abs(h.center_x(bx)) <= h.x_width);
    CHECK(std::abs(h.center_y(by)) <= h.y_width);
    CHECK(std::abs(h.center_s(bs)) <= h.s_width);
  }
  SUBCASE("mass is conserved for arbitrary instances") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      Rng rng(seed);
      std::vector<Box> bs1, bs2;
      for (int i = 0; i < 7; ++i) bs1.push_back(testutil::random_box(rng, 80, 80));
      for (int i = 0; i < 9; ++i) bs2.push_back(testutil::random_box(rng, 80, 80));
      ProposalSet r = testutil::make_set(80, 80, bs1);
      ProposalSet rp = testutil::make_set(80, 80, bs2);
      Matrix A(7, 9);
      double sumA = 0;
      for (double& v : A.data) {
        v = rng.uniform(0, 1);
        sumA += v;
      }
      HoughHistogram h = hough_histogram(r, rp, A);
      CHECK(h.total_mass() == doctest::Approx(sumA).epsilon(1e-6));
    }
  }
}

TEST_CASE("phm exact matches the naive oracle") {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    Rng rng(seed);
    std::vector<Box> bs1, bs2;
    for (int i = 0; i < 10; ++i) bs1.push_back(testutil::random_box(rng, 100, 100));
    for (int i = 0; i < 10; ++i) bs2.push_back(testutil::random_box(rng, 100, 100));
    ProposalSet r = testutil::make_set(100, 100, bs1);
    ProposalSet rp = testutil::make_set(100, 100, bs2);
    Matrix A(10, 10);
    for (double& v : A.data) v = rng.uniform(0, 1);
    KernelBandwidths bw = KernelBandwidths::defaults(100, 100);

    Matrix oracle = testutil::naive_phm_posterior(r, rp, A, bw.sigma_xy, bw.sigma_s);
    Assignment asg = phm(r, rp, A, bw, PhmMode::exact);
    for (int i = 0; i < 10; ++i) {
      int best = 0;
      for (int j = 1; j < 10; ++j)
        if (oracle.at(i, j) > oracle.at(i, best)) best = j;
      CHECK(asg.matches[i].tgt_id == best);
      double got = asg.matches[i].posterior;
      double want = oracle.at(i, best);
      CHECK(std::abs(got - want) <= 1e-9 * std::max({1.0, got, want}));
    }
  }
}

TEST_CASE("phm identity pair and singleton") {
  Instance inst = identity_instance(21, 12);
  KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
  Assignment asg = phm(inst.R, inst.Rp, inst.A, bw, PhmMode::exact);
  for (int i = 0; i < 12; ++i) CHECK(asg.matches[i].tgt_id == i);

  ProposalSet one = testutil::make_set(100, 100, {{5, 5, 50, 50}});
  Matrix a1 = testutil::make_matrix(1, 1, {0.4});
  CHECK(phm(one, one, a1, bw, PhmMode::exact).matches[0].tgt_id == 0);
  CHECK(phm(one, one, a1, bw, PhmMode::binned).matches[0].tgt_id == 0);
}

TEST_CASE("phm exact refuses oversized instances") {
  Rng rng(31);
  std::vector<Box> boxes;
  for (int i = 0; i < 50; ++i) boxes.push_back(testutil::random_box(rng, 100, 100));
  ProposalSet r = testutil::make_set(100, 100, boxes);
  Matrix A(50, 50);
  for (double& v : A.data) v = 0.5;
  KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
  CHECK_THROWS_WITH_AS(phm(r, r, A, bw, PhmMode::exact),
                       doctest::Contains("binned"), std::invalid_argument);
}

TEST_CASE("phm binned agrees with exact on most assignments") {
  int agree = 0, total = 0;
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    Rng rng(seed);
    std::vector<Box> bs1, bs2;
    for (int i = 0; i < 12; ++i) bs1.push_back(testutil::random_box(rng, 100, 100));
    for (int i = 0; i < 12; ++i) bs2.push_back(testutil::random_box(rng, 100, 100));
    ProposalSet r = testutil::make_set(100, 100, bs1);
    ProposalSet rp = testutil::make_set(100, 100, bs2);
    Matrix A(12, 12);
    for (double& v : A.data) v = rng.uniform(0, 1);
    KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
    Assignment ex = phm(r, rp, A, bw, PhmMode::exact);
    Assignment bi = phm(r, rp, A, bw, PhmMode::binned, {32, 32, 32});
    for (int i = 0; i < 12; ++i) {
      agree += ex.matches[i].tgt_id == bi.matches[i].tgt_id;
      ++total;
    }
  }
  CHECK(agree >= total * 8 / 10);
}

TEST_CASE("neighborhood membership rules") {
  ProposalSet s = testutil::make_set(
      100, 100,
      {{0, 0, 10, 10}, {50, 50, 70, 70}, {2, 2, 8, 8}, {10, 0, 20, 10}});
  // disjoint from everything: only itself
  auto n1 = neighborhood(s, 1);
  CHECK(n1 == std::vector<int>{1});
  // nested boxes are mutual neighbors
  auto n0 = neighborhood(s, 0);
  CHECK(std::find(n0.begin(), n0.end(), 2) != n0.end());
  auto n2 = neighborhood(s, 2);
  CHECK(std::find(n2.begin(), n2.end(), 0) != n2.end());
  // sharing only an edge (zero area) is not enough
  CHECK(std::find(n0.begin(), n0.end(), 3) == n0.end());
  // every neighborhood contains its own id
  for (int i = 0; i < 4; ++i) {
    auto n = neighborhood(s, i);
    CHECK(std::find(n.begin(), n.end(), i) != n.end());
  }
}

TEST_CASE("local_offsets identity, translation, robustness") {
  SUBCASE("identity pair gives zero offsets") {
    Instance inst = identity_instance(51, 10);
    LocalOffsetField f = local_offsets(inst.R, inst.Rp, inst.A);
    for (int i = 0; i < 10; ++i) {
      CHECK(f.x_star[i].dx == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(f.x_star[i].dy == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(f.x_star[i].dsc == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(f.neighbor_count[i] >= 1);
    }
  }
  SUBCASE("sources translated by (10,0) against their untranslated twins") {
    Rng rng(52);
    std::vector<Box> base, moved;
    for (int i = 0; i < 8; ++i) {
      Box b = testutil::random_box(rng, 80, 80, 10);
      base.push_back(b);
      moved.push_back({b.x_min + 10, b.y_min, b.x_max + 10, b.y_max});
    }
    ProposalSet R = testutil::make_set(100, 100, moved);
    ProposalSet Rp = testutil::make_set(100, 100, base);
    Matrix A(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) A.at(i, j) = i == j ? 0.95 : 0.2;
    LocalOffsetField f = local_offsets(R, Rp, A);
    for (int i = 0; i < 8; ++i) {
      CHECK(f.x_star[i].dx == doctest::Approx(10.0).epsilon(1e-6));
      CHECK(f.x_star[i].dy == doctest::Approx(0.0).epsilon(1e-6));
      CHECK(f.x_star[i].dsc == doctest::Approx(0.0).epsilon(1e-6));
    }
  }
  SUBCASE("one corrupted neighbor cannot move the median") {
    // six stacked neighbors; target twins shifted by (6,0) except one junk
    std::vector<Box> src, tgt;
    for (int i = 0; i < 6; ++i) {
      Box b{10.0 + i, 10.0 + i, 40.0 + i, 40.0 + i};
      src.push_back(b);
      tgt.push_back({b.x_min - 6, b.y_min, b.x_max - 6, b.y_max});
    }
    tgt[5] = {60, 60, 90, 90};  // corrupted match target
    ProposalSet R = testutil::make_set(100, 100, src);
    ProposalSet Rp = testutil::make_set(100, 100, tgt);
    Matrix A(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) A.at(i, j) = i == j ? 0.9 : 0.1;
    LocalOffsetField f = local_offsets(R, Rp, A);
    std::vector<Offset> offs;
    for (int i = 0; i < 5; ++i) offs.push_back({6, 0, 0});
    // the corrupted neighbor's true offset
    LocationVector a = location_vector(src[5]), b = location_vector(tgt[5]);
    offs.push_back(offset_between(a, b));
    double oracle = testutil::grid_median_objective(offs, 50);
    CHECK(median_objective(f.x_star[0], offs) <= oracle + 1e-6);
    CHECK(f.x_star[0].dx == doctest::Approx(6.0).epsilon(0.01));
    CHECK(std::abs(f.x_star[0].dy) < 0.05);
  }
}

TEST_CASE("lom identity and translation behavior") {
  SUBCASE("identity pair matches itself with maximal posterior") {
    Instance inst = identity_instance(61, 12);
    KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
    Assignment asg = lom(inst.R, inst.Rp, inst.A, bw);
    for (int i = 0; i < 12; ++i) CHECK(asg.matches[i].tgt_id == i);
  }
  SUBCASE("translated instance recovers the permutation") {
    Rng rng(62);
    std::vector<Box> base, moved;
    for (int i = 0; i < 10; ++i) {
      Box b = testutil::random_box(rng, 70, 70, 12);
      base.push_back(b);
      moved.push_back({b.x_min + 10, b.y_min + 5, b.x_max + 10, b.y_max + 5});
    }
    ProposalSet R = testutil::make_set(100, 100, moved);
    ProposalSet Rp = testutil::make_set(100, 100, base);
    Matrix A(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) A.at(i, j) = i == j ? 0.9 : 0.25;
    KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
    Assignment asg = lom(R, Rp, A, bw);
    for (int i = 0; i < 10; ++i) CHECK(asg.matches[i].tgt_id == i);
  }
  SUBCASE("the per-row confidence factor never changes the argmax") {
    Instance inst = identity_instance(63, 15);
    KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
    Assignment asg = lom(inst.R, inst.Rp, inst.A, bw);
    LocalOffsetField f = local_offsets(inst.R, inst.Rp, inst.A);
    for (int i = 0; i < 15; ++i) {
      LocationVector gi = location_vector(inst.R[i].box);
      int best = 0;
      double best_v = -1;
      for (int j = 0; j < 15; ++j) {
        LocationVector gj = location_vector(inst.Rp[j].box);
        Offset o = offset_between(gi, gj);
        Offset d{o.dx - f.x_star[i].dx, o.dy - f.x_star[i].dy,
                 o.dsc - f.x_star[i].dsc};
        double v = inst.A.at(i, j) * gauss_kernel(d, bw);
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      CHECK(asg.matches[i].tgt_id == best);
    }
  }
}

TEST_CASE("match CSV round trip and validation") {
  testutil::TempDir td("match");
  Instance inst = identity_instance(71, 9);
  Assignment asg = nam(inst.R, inst.Rp, inst.A);
  export_matches(asg, td.file("m.csv"));
  Assignment back = import_matches(td.file("m.csv"));
  REQUIRE(back.matches.size() == asg.matches.size());
  for (size_t i = 0; i < asg.matches.size(); ++i) {
    CHECK(back.matches[i].src_id == asg.matches[i].src_id);
    CHECK(back.matches[i].tgt_id == asg.matches[i].tgt_id);
    CHECK(back.matches[i].posterior ==
          doctest::Approx(asg.matches[i].posterior).epsilon(1e-15));
  }

  std::ofstream(td.file("bad.csv"))
      << "src_id,tgt_id,posterior,appearance,geometric\n"
      << "1,0,0.5,0.5,1\n";
  CHECK_THROWS(import_matches(td.file("bad.csv")));
}

TEST_CASE("mismatched appearance matrix is rejected") {
  Instance inst = identity_instance(81, 5);
  Matrix wrong(4, 5);
  CHECK_THROWS(nam(inst.R, inst.Rp, wrong));
  KernelBandwidths bw = KernelBandwidths::defaults(100, 100);
  CHECK_THROWS(lom(inst.R, inst.Rp, wrong, bw));
  CHECK_THROWS(phm(inst.R, inst.Rp, wrong, bw));
}

}  // TEST_SUITE
