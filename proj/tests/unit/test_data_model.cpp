/*
 * Copyright 2026 The nngp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "../support.hpp"
#include "nngp/errors.hpp"

using namespace nngp;

TEST_SUITE("data-model") {

TEST_CASE("flatten_cov on a single entry is the identity") {
  Eigen::MatrixXd m(1, 1);
  m << 2.0;
  const CovFull k(m, 1, SpatialShape::line(1));
  CHECK(flatten_cov(k)(0, 0) == 2.0);
}

TEST_CASE("flatten_cov with one pixel equals the sample slice") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.3, 0.3, 2.0;
  const CovFull k(m, 2, SpatialShape::line(1));
  const Eigen::MatrixXd f = flatten_cov(k);
  for (int x = 0; x < 2; ++x)
    for (int x2 = 0; x2 < 2; ++x2) CHECK(f(x, x2) == k(x, 0, x2, 0));
}

TEST_CASE("flatten_cov of a random PSD tensor is symmetric PSD and sample-major") {
  std::mt19937_64 rng(11);
  const CovFull k = test::random_cov(2, SpatialShape::line(3), rng);
  const Eigen::MatrixXd f = flatten_cov(k);
  CHECK(f.isApprox(f.transpose(), 0.0));
  CHECK(test::psd_within_tolerance(f));
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 3; ++a)
      for (int x2 = 0; x2 < 2; ++x2)
        for (int a2 = 0; a2 < 3; ++a2) CHECK(f(x * 3 + a, x2 * 3 + a2) == k(x, a, x2, a2));
}

TEST_CASE("unflatten after flatten is the identity") {
  std::mt19937_64 rng(5);
  const CovFull k = test::random_cov(3, SpatialShape::grid(2, 2), rng);
  const CovFull back = unflatten_cov(flatten_cov(k), 3, SpatialShape::grid(2, 2));
  CHECK(back.matrix() == k.matrix());
  CHECK(back.shape() == k.shape());
}

TEST_CASE("diag_of a constant tensor is constant") {
  const CovFull k(Eigen::MatrixXd::Constant(6, 6, 0.7), 2, SpatialShape::line(3));
  const CovDiag d = diag_of(k);
  for (double v : d.data()) CHECK(v == 0.7);
  CHECK(d.entries() == 2u * 2u * 3u);
}

TEST_CASE("diag_of a one-pixel input kernel keeps every value") {
  const InputSet x({1.0, 2.0, -1.0, 0.5}, 2, 2, SpatialShape::line(1));
  const CovFull k = input_cov(x);
  const CovDiag d = diag_of(k);
  for (int s = 0; s < 2; ++s)
    for (int s2 = 0; s2 < 2; ++s2) CHECK(d(s, s2, 0) == k(s, 0, s2, 0));
}

TEST_CASE("diag_of matches the full tensor bitwise") {
  std::mt19937_64 rng(3);
  const CovFull k = test::random_cov(3, SpatialShape::line(5), rng);
  const CovDiag d = diag_of(k);
  for (int x = 0; x < 3; ++x)
    for (int x2 = 0; x2 < 3; ++x2)
      for (int a = 0; a < 5; ++a) CHECK(d(x, x2, a) == k(x, a, x2, a));
}

TEST_CASE("expand zero-completes off-diagonal pixels") {
  std::mt19937_64 rng(4);
  const CovDiag d = diag_of(test::random_cov(2, SpatialShape::line(3), rng));
  const CovFull e = expand(d);
  for (int x = 0; x < 2; ++x)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int a = 0; a < 3; ++a)
        for (int a2 = 0; a2 < 3; ++a2) CHECK(e(x, a, x2, a2) == (a == a2 ? d(x, x2, a) : 0.0));
}

TEST_CASE("input_cov of a single value 2 is 4") {
  const InputSet x({2.0}, 1, 1, SpatialShape::line(1));
  CHECK(input_cov(x)(0, 0, 0, 0) == 4.0);
}

TEST_CASE("input_cov of x and -x") {
  const InputSet x({1.0, -1.0}, 2, 1, SpatialShape::line(1));
  const Eigen::MatrixXd f = flatten_cov(input_cov(x));
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  CHECK(f == expected);
}

TEST_CASE("input_cov averages channel products") {
  // Two channels, two pixels: [K]_{a,a'} = (x_{0,a} x'_{0,a'} + x_{1,a} x'_{1,a'}) / 2.
  const InputSet x({1.0, 2.0, 3.0, 4.0}, 1, 2, SpatialShape::line(2));
  const CovFull k = input_cov(x);
  CHECK(k(0, 0, 0, 1) == doctest::Approx((1.0 * 2.0 + 3.0 * 4.0) / 2.0));
  CHECK(k(0, 1, 0, 1) == doctest::Approx((4.0 + 16.0) / 2.0));
}

TEST_CASE("normalized inputs have unit average pixel variance") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 4, c = 3, d = 5;
  std::vector<double> v(n * c * d);
  for (int s = 0; s < n; ++s) {
    double mean = 0.0, ss = 0.0;
    for (int i = 0; i < c * d; ++i) mean += (v[s * c * d + i] = g(rng));
    mean /= c * d;
    for (int i = 0; i < c * d; ++i) ss += (v[s * c * d + i] - mean) * (v[s * c * d + i] - mean);
    const double sd = std::sqrt(ss / (c * d));
    for (int i = 0; i < c * d; ++i) v[s * c * d + i] = (v[s * c * d + i] - mean) / sd;
  }
  const CovFull k = input_cov(InputSet(v, n, c, SpatialShape::line(d)));
  for (int s = 0; s < n; ++s) {
    double avg = 0.0;
    for (int a = 0; a < d; ++a) avg += k(s, a, s, a);
    CHECK(avg / d == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("input_cov is PSD and its diagonal agrees with input_cov_diag bitwise") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const InputSet x = test::random_inputs(3, 2, SpatialShape::grid(2, 3), seed);
    const CovFull k = input_cov(x);
    CHECK(test::psd_within_tolerance(flatten_cov(k)));
    const CovDiag d = input_cov_diag(x);
    const CovDiag from_full = diag_of(k);
    CHECK(std::equal(d.data().begin(), d.data().end(), from_full.data().begin()));
    std::vector<double> pair(6);
    input_cov_pair(x, 1, 2, pair);
    for (int a = 0; a < 6; ++a) CHECK(pair[a] == d(1, 2, a));
  }
}

TEST_CASE("for one pixel the full and diagonal tensors coincide") {
  const InputSet x = test::random_inputs(4, 3, SpatialShape::line(1), 2);
  const CovFull k = input_cov(x);
  const CovDiag d = input_cov_diag(x);
  for (int s = 0; s < 4; ++s)
    for (int s2 = 0; s2 < 4; ++s2) CHECK(k(s, 0, s2, 0) == d(s, s2, 0));
}

TEST_CASE("InputSet validation") {
  CHECK_THROWS_AS(InputSet({1.0, 0.0, 0.0, 0.0}, 2, 1, SpatialShape::line(2)), ConfigError);
  CHECK_THROWS_AS(InputSet({1.0, 1.0, 1.0}, 2, 1, SpatialShape::line(2)), ShapeError);
  CHECK_THROWS_AS(InputSet({}, 0, 1, SpatialShape::line(2)), ShapeError);
  const InputSet x({1.0, 2.0, 3.0, 4.0}, 2, 1, SpatialShape::line(2));
  CHECK(x.ids() == std::vector<std::string>{"0", "1"});
  const InputSet flat = test::random_inputs(2, 3, SpatialShape::grid(2, 2), 1).flattened_to_channels();
  CHECK(flat.channels() == 12);
  CHECK(flat.pixels() == 1);
}

TEST_CASE("ArchConfig validation") {
  ArchConfig cfg;
  cfg.depth = 2;
  CHECK_NOTHROW(cfg.validate());
  cfg.v = {0.2, 0.5, 0.3};
  CHECK_NOTHROW(cfg.validate());
  cfg.v = {0.2, 0.5, 0.31};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.v = {0.5, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.v = {-0.1, 0.6, 0.5};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.v.clear();
  cfg.connectivity = Connectivity::fcn;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.filter_half_width = 0;
  CHECK_NOTHROW(cfg.validate());
  cfg.depth = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("post-op matrices") {
  SUBCASE("avg_pool rows sum to one") {
    const LinearPostOp op{PostOpKind::avg_pool, 2, 3, 0};
    const Eigen::MatrixXd b = op.matrix(SpatialShape::line(7));
    CHECK(b.rows() == 3);
    for (Eigen::Index i = 0; i < b.rows(); ++i) CHECK(b.row(i).sum() == doctest::Approx(1.0));
  }
  SUBCASE("stride and subsample have one 1 per row") {
    for (const LinearPostOp op : {LinearPostOp{PostOpKind::stride, 2, 1, 0},
                                  LinearPostOp{PostOpKind::subsample_slice, 1, 3, 2}}) {
      const Eigen::MatrixXd b = op.matrix(SpatialShape::grid(6, 6));
      for (Eigen::Index i = 0; i < b.rows(); ++i) {
        CHECK(b.row(i).sum() == 1.0);
        CHECK(b.row(i).maxCoeff() == 1.0);
        CHECK((b.row(i).array() != 0.0).count() == 1);
      }
    }
  }
  SUBCASE("output shapes") {
    CHECK(LinearPostOp{PostOpKind::stride, 2, 1, 0}.output_shape(SpatialShape::line(5)) == SpatialShape::line(3));
    CHECK(LinearPostOp{PostOpKind::avg_pool, 2, 2, 0}.output_shape(SpatialShape::grid(8, 8)) ==
          SpatialShape::grid(4, 4));
    CHECK(LinearPostOp{PostOpKind::subsample_slice, 1, 1, 3}.output_shape(SpatialShape::line(8)) ==
          SpatialShape::line(1));
  }
}

TEST_CASE("enum names round-trip") {
  for (auto p : {Nonlinearity::relu, Nonlinearity::erf}) CHECK(parse_nonlinearity(to_string(p)) == p);
  for (auto p : {Padding::circular, Padding::valid, Padding::same}) CHECK(parse_padding(to_string(p)) == p);
  for (auto c : {Connectivity::cnn, Connectivity::lcn, Connectivity::fcn}) CHECK(parse_connectivity(to_string(c)) == c);
  for (auto r : {ReadoutKind::vectorize, ReadoutKind::pool, ReadoutKind::subsample_pixel, ReadoutKind::projection}) {
    CHECK(parse_readout_kind(to_string(r)) == r);
  }
  CHECK_THROWS_AS(parse_padding("mirror"), ConfigError);
}

}  // TEST_SUITE
