#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "reactkd/error.hpp"
#include "reactkd/nets.hpp"
#include "suites.hpp"

using namespace reactkd;

namespace {

FeatureVolume random_volume(std::mt19937_64& rng, int channels, Dims d, double scale = 1.0) {
  FeatureVolume f(channels, d);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : f.data) v = n(rng);
  return f;
}

}  // namespace

TEST_CASE("attention suite: rows, masks, dense oracle, identities, convolutions") {
  const auto r = suite::nets_suite(24, 30, 77);
  CHECK(r.row_sum <= 1e-10);
  CHECK(r.dense <= 1e-12);
  CHECK(r.masked_pairs > 0);
  CHECK(r.masked_nonzero == 0);
  CHECK(r.residual_identity);
  CHECK(r.conv <= 1e-10);
}

TEST_CASE("unshifted windows have no masked pairs; shifted ones do") {
  const WindowShape w{2, 2, 2};
  const AttentionParams p = AttentionParams::random(2, 2, 3, w, 1, 5);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd tokens = oracle::random_matrix(64, 2, rng);
  std::vector<WindowAttention> plain, shifted;
  wmsa_forward(tokens, {4, 4, 4}, p, false, &plain);
  wmsa_forward(tokens, {4, 4, 4}, p, true, &shifted);
  CHECK(plain.size() == 8);
  long blocked = 0;
  for (const auto& wa : plain)
    for (const auto& row : wa.allowed) blocked += std::count(row.begin(), row.end(), false);
  CHECK(blocked == 0);
  for (const auto& wa : shifted)
    for (std::size_t i = 0; i < wa.allowed.size(); ++i)
      for (std::size_t j = 0; j < wa.allowed.size(); ++j)
        if (!wa.allowed[i][j]) CHECK(wa.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0);
  // The window anchored at the origin stays whole after the roll.
  const auto& first = shifted.front().allowed;
  for (const auto& row : first) CHECK(std::count(row.begin(), row.end(), true) == 8);
  CHECK(window_shift({3, 7, 7}) == std::array<int, 3>{1, 3, 3});
}

TEST_CASE("attention degenerate cases") {
  std::mt19937_64 rng(2);
  SUBCASE("single token returns its value projection") {
    const AttentionParams p = AttentionParams::random(3, 2, 2, {1, 1, 1}, 1, 9);
    const Eigen::MatrixXd t = oracle::random_matrix(1, 3, rng);
    CHECK((wmsa_forward(t, p, false) - t * p.w_v).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("zero queries give uniform weights and mean values") {
    AttentionParams p = AttentionParams::random(3, 4, 2, {2, 2, 2}, 2, 9);
    p.w_q.setZero();
    const Eigen::MatrixXd t = oracle::random_matrix(8, 3, rng);
    std::vector<WindowAttention> trace;
    const Eigen::MatrixXd out = wmsa_forward(t, p, false, &trace);
    for (const auto& wa : trace) CHECK((wa.weights.array() - 0.125).abs().maxCoeff() <= 1e-15);
    const Eigen::RowVectorXd mean = (t * p.w_v).colwise().mean();
    for (Eigen::Index i = 0; i < 8; ++i) CHECK((out.row(i) - mean).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("shape errors") {
    const AttentionParams p = AttentionParams::random(3, 4, 2, {2, 2, 2}, 2, 9);
    CHECK_THROWS_AS(wmsa_forward(oracle::random_matrix(7, 3, rng), p, false), Error);
    CHECK_THROWS_AS(wmsa_forward(oracle::random_matrix(27, 3, rng), {3, 3, 3}, p, false), Error);
    CHECK_THROWS_AS(AttentionParams::random(3, 3, 2, {2, 2, 2}, 2, 9).validate(), Error);
  }
}

TEST_CASE("swin block equals its four sub-steps") {
  std::mt19937_64 rng(3);
  const WindowShape w{2, 2, 2};
  SwinBlockParams p{AttentionParams::random(4, 4, 6, w, 2, 11, 0.4), AttentionParams::random(4, 4, 6, w, 2, 12, 0.4)};
  p.regular.norm1.gain = oracle::random_matrix(4, 1, rng).col(0);
  p.shifted.norm2.offset = oracle::random_matrix(4, 1, rng).col(0);
  const Dims grid{4, 4, 2};
  const Eigen::MatrixXd z0 = oracle::random_matrix(32, 4, rng);
  const Eigen::MatrixXd z1 = wmsa_forward(layer_norm(z0, p.regular.norm1), grid, p.regular, false) + z0;
  const Eigen::MatrixXd z2 = mlp_forward(layer_norm(z1, p.regular.norm2), p.regular.mlp) + z1;
  const Eigen::MatrixXd z3 = wmsa_forward(layer_norm(z2, p.shifted.norm1), grid, p.shifted, true) + z2;
  const Eigen::MatrixXd z4 = mlp_forward(layer_norm(z3, p.shifted.norm2), p.shifted.mlp) + z3;
  CHECK((swin_block_forward(z0, grid, p) - z4).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("swin block stays finite") {
  std::mt19937_64 rng(4);
  const WindowShape w{2, 2, 2};
  for (int t = 0; t < 1000; ++t) {
    const SwinBlockParams p{AttentionParams::random(3, 3, 4, w, 1, 2 * t, 1.0),
                            AttentionParams::random(3, 3, 4, w, 1, 2 * t + 1, 1.0)};
    CHECK(swin_block_forward(oracle::random_matrix(8, 3, rng, 3.0), p).allFinite());
  }
}

TEST_CASE("gelu, layer norm and tokens") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-14));
  std::mt19937_64 rng(5);
  const FeatureVolume f = random_volume(rng, 3, {2, 3, 4});
  const FeatureVolume back = from_tokens(to_tokens(f), f.dims);
  CHECK(back.data == f.data);
  CHECK(to_tokens(f)(5, 2) == f.at(2, 5));
}

TEST_CASE("instance norm and residual unit") {
  std::mt19937_64 rng(6);
  const FeatureVolume f = random_volume(rng, 3, {3, 4, 5}, 4.0);
  const FeatureVolume n = instance_norm(f);
  for (int c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    for (std::size_t i = 0; i < 60; ++i) mean += n.at(c, i);
    mean /= 60;
    for (std::size_t i = 0; i < 60; ++i) sq += (n.at(c, i) - mean) * (n.at(c, i) - mean);
    CHECK(std::abs(mean) <= 1e-5);
    CHECK(std::abs(std::sqrt(sq / 60) - 1.0) <= 1e-5);
  }

  // Centre-tap kernel: conv1 is the identity, so the unit is
  // f + conv2(relu(instance_norm(f))) which the loops below rebuild.
  FeatureVolume one = random_volume(rng, 1, {3, 3, 3});
  ResUnitParams p;
  p.conv1 = Conv3d::zeros(1, 1, 3);
  p.conv1.w(0, 0, 1, 1, 1) = 1.0;
  p.conv2 = Conv3d::random(1, 1, 3, 1, 8, 0.3);
  FeatureVolume z = relu(instance_norm(oracle::conv3d(one, p.conv1)));
  const FeatureVolume branch = oracle::conv3d(z, p.conv2);
  const FeatureVolume got = resunit_forward(one, p);
  for (std::size_t i = 0; i < 27; ++i) CHECK(std::abs(got.data[i] - (one.data[i] + branch.data[i])) <= 1e-12);
}

TEST_CASE("downsampling and reduction") {
  std::mt19937_64 rng(7);
  ResUnitParams p;
  p.down = Conv3d::random(2, 2, 3, 2, 3, 0.5);
  p.reduce = Conv3d::zeros(2, 2, 1);
  p.reduce.w(0, 0, 0, 0, 0) = p.reduce.w(1, 1, 0, 0, 0) = 1.0;
  const FeatureVolume f = random_volume(rng, 2, {4, 4, 4});
  const FeatureVolume d = downsample_reduce(f, p);
  CHECK(d.dims == Dims{2, 2, 2});
  const FeatureVolume want = oracle::conv3d(f, p.down);
  for (std::size_t i = 0; i < d.data.size(); ++i) CHECK(std::abs(d.data[i] - want.data[i]) <= 1e-12);
  CHECK(downsample_reduce(random_volume(rng, 2, {5, 3, 2}), p).dims == Dims{3, 2, 1});
  CHECK_THROWS_AS(downsample_reduce(random_volume(rng, 2, {1, 4, 4}), p), Error);
}

TEST_CASE("CBAM gates") {
  std::mt19937_64 rng(8);
  const FeatureVolume f = random_volume(rng, 4, {3, 3, 3});
  SUBCASE("open gates pass the input through") {
    CbamParams p = CbamParams::zeros(4, 2, 3);
    p.b2.setConstant(40.0);
    p.spatial.bias[0] = 40.0;
    const FeatureVolume out = cbam3d_forward(f, p);
    for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(std::abs(out.data[i] - f.data[i]) <= 1e-4);
  }
  SUBCASE("zero input stays zero and gates stay inside (0, 1)") {
    const CbamParams p = CbamParams::random(4, 2, 3, 5, 1.0);
    const FeatureVolume zero(4, {3, 3, 3});
    CHECK(cbam3d_forward(zero, p).data == zero.data);
    CbamTrace trace;
    const FeatureVolume out = cbam3d_forward(f, p, &trace);
    CHECK(out.dims == f.dims);
    CHECK(trace.channel_gate.minCoeff() > 0.0);
    CHECK(trace.channel_gate.maxCoeff() < 1.0);
    for (double g : trace.spatial_gate) CHECK((g > 0.0 && g < 1.0));
    for (std::size_t i = 0; i < f.data.size(); ++i) CHECK(std::abs(out.data[i]) <= std::abs(f.data[i]));
  }
  SUBCASE("two-channel channel gate by hand") {
    FeatureVolume g(2, {1, 1, 2});
    g.data = {1.0, 3.0, -2.0, 0.0};  // channel 0: avg 2, max 3; channel 1: avg -1, max 0
    CbamParams p = CbamParams::zeros(2, 2, 1);
    p.w1 << 0.5, -1.0;
    p.b1 << 0.1;
    p.w2 << 2.0, -1.0;
    p.b2 << 0.0, 0.5;
    // hidden(avg) = relu(0.5*2 + 1 + 0.1) = 2.1, hidden(max) = relu(1.5 - 0 + 0.1) = 1.6
    const double pre0 = 2.0 * 2.1 + 2.0 * 1.6, pre1 = -2.1 + 0.5 - 1.6 + 0.5;
    CbamTrace trace;
    cbam3d_forward(g, p, &trace);
    CHECK(trace.channel_gate(0) == doctest::Approx(1.0 / (1.0 + std::exp(-pre0))).epsilon(1e-15));
    CHECK(trace.channel_gate(1) == doctest::Approx(1.0 / (1.0 + std::exp(-pre1))).epsilon(1e-15));
    CHECK_THROWS_AS(cbam3d_forward(random_volume(rng, 3, {2, 2, 2}), p), Error);
  }
}

TEST_CASE("student head") {
  StudentHead zero{Eigen::MatrixXd::Zero(3, 5), Eigen::VectorXd::Zero(3)};
  CHECK(student_head_forward(Eigen::VectorXd::Ones(5), zero) == Eigen::VectorXd::Zero(3));
  StudentHead id{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
  const Eigen::Vector3d x(0.3, -1.2, 7.0);
  CHECK(student_head_forward(x, id) == Eigen::VectorXd(x));
  CHECK_THROWS_AS(student_head_forward(Eigen::VectorXd::Ones(4), id), Error);
  const StudentHead a = StudentHead::init(6, 3, 42), b = StudentHead::init(6, 3, 42);
  CHECK(a.weight == b.weight);
  CHECK(a.bias == Eigen::VectorXd::Zero(3));
}

TEST_CASE("parameter JSON round-trip") {
  ParamStore store;
  const Conv3d c = Conv3d::random(2, 3, 3, 2, 4, 0.5);
  store_conv(store, "enc.stem", c);
  const ParamStore back = params_from_json(params_to_json(store));
  const Conv3d c2 = load_conv(back, "enc.stem");
  CHECK(c2.weights == c.weights);
  CHECK(c2.stride == 2);
  CHECK(c2.out_channels == 3);
}
