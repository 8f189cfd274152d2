#include <doctest.h>

#include "crackgan/attention.hpp"
#include "crackgan/error.hpp"
#include "support.hpp"

using namespace crackgan;
using testing::max_abs_diff;
using testing::uniform;

namespace {

Tensor sum(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out += b;
  return out;
}

// Swaps window blocks (br0, bc0) and (br1, bc1) in every channel.
Tensor swap_windows(const Tensor& x, int win, int br0, int bc0, int br1, int bc1) {
  Tensor out = x;
  for (int b = 0; b < x.dim(0); ++b) {
    for (int c = 0; c < x.dim(1); ++c) {
      for (int r = 0; r < win; ++r) {
        for (int q = 0; q < win; ++q) {
          out.at(b, c, br0 * win + r, bc0 * win + q) = x.at(b, c, br1 * win + r, bc1 * win + q);
          out.at(b, c, br1 * win + r, bc1 * win + q) = x.at(b, c, br0 * win + r, bc0 * win + q);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("CBAM complement identity per stage") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    ParameterStore store;
    Cbam cbam(store, "gate", 8, 4, false, rng);
    const Var f = Var::constant(uniform({2, 8, 6, 6}, rng, -2, 2));
    NoGradGuard guard;
    const Tensor channel = sum(cbam.channel_stage(f, false).value(), cbam.channel_stage(f, true).value());
    const Tensor spatial = sum(cbam.spatial_stage(f, false).value(), cbam.spatial_stage(f, true).value());
    REQUIRE(max_abs_diff(channel, f.value()) <= 1e-6);
    REQUIRE(max_abs_diff(spatial, f.value()) <= 1e-6);
  }
}

TEST_CASE("CBAM masks lie in (0,1) and preserve shape") {
  Rng rng(3);
  ParameterStore store;
  Cbam plain(store, "a", 6, 8, false, rng);
  Cbam ignore(store, "b", 6, 8, true, rng);
  CHECK(plain.hidden_channels() == 1);
  Tensor x = uniform({1, 6, 5, 7}, rng, -3, 3);
  // Channels 0 and 1 carry identical content.
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 7; ++c) x.at(0, 1, r, c) = x.at(0, 0, r, c);
  }
  NoGradGuard guard;
  const Tensor mc = plain.channel_mask(Var::constant(x)).value();
  const Tensor ms = plain.spatial_mask(Var::constant(x)).value();
  CHECK(mc.shape() == Shape{1, 6, 1, 1});
  CHECK(ms.shape() == Shape{1, 1, 5, 7});
  for (double v : mc.values()) CHECK((v > 0 && v < 1));
  for (double v : ms.values()) CHECK((v > 0 && v < 1));
  // The output layer of the shared MLP has one row per channel, so identical
  // channels only share a mask entry once those rows agree.
  CHECK(mc[0] != mc[1]);
  for (const auto& p : store.parameters()) {
    if (p.name != "a.fc2.weight" && p.name != "a.fc2.bias") continue;
    Var v = p.var;
    const int cols = v.value().shape().size() == 2 ? v.value().dim(1) : 1;
    for (int k = 0; k < cols; ++k) v.mutable_value()[cols + k] = v.value()[k];
  }
  const Tensor tied = plain.channel_mask(Var::constant(x)).value();
  CHECK(tied[0] == tied[1]);
  CHECK(plain.forward(Var::constant(x)).value().shape() == x.shape());
  CHECK(ignore.forward(Var::constant(x)).value().shape() == x.shape());
  CHECK_THROWS_AS(plain.forward(Var::constant(Tensor({1, 5, 4, 4}))), ShapeError);
}

TEST_CASE("LSA attention rows are stochastic") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    ParameterStore store;
    LocalSelfAttention lsa(store, "lsa", 4, 8, rng);
    std::vector<Tensor> maps;
    NoGradGuard guard;
    const Tensor y = lsa.forward_with_maps(Var::constant(uniform({1, 4, 16, 16}, rng)), maps).value();
    REQUIRE(y.shape() == Shape{1, 4, 16, 16});
    REQUIRE(maps.size() == 2 * 4);
    for (const auto& m : maps) {
      REQUIRE(m.shape() == Shape{64, 64});
      for (int r = 0; r < 64; ++r) {
        double s = 0;
        for (int c = 0; c < 64; ++c) s += m[r * 64 + c];
        REQUIRE(std::abs(s - 1.0) <= 1e-6);
      }
    }
  }
}

TEST_CASE("LSA is equivariant to window permutations") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    ParameterStore store;
    LocalSelfAttention lsa(store, "lsa", 3, 4, rng);
    const Tensor x = uniform({1, 3, 8, 12}, rng);
    NoGradGuard guard;
    const Tensor y = lsa.forward(Var::constant(x)).value();
    const Tensor y_perm = lsa.forward(Var::constant(swap_windows(x, 4, 0, 0, 1, 2))).value();
    REQUIRE(max_abs_diff(y_perm, swap_windows(y, 4, 0, 0, 1, 2)) <= 1e-6);
  }
}

TEST_CASE("LSA on a constant window gives a constant window") {
  Rng rng(5);
  ParameterStore store;
  LocalSelfAttention lsa(store, "lsa", 3, 4, rng);
  Tensor x = uniform({1, 3, 8, 8}, rng);
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 4; ++r) {
      for (int q = 0; q < 4; ++q) x.at(0, c, r, q) = 0.3 * (c + 1);
    }
  }
  NoGradGuard guard;
  const Tensor y = lsa.forward(Var::constant(x)).value();
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 4; ++r) {
      for (int q = 0; q < 4; ++q) CHECK(std::abs(y.at(0, c, r, q) - y.at(0, c, 0, 0)) <= 1e-12);
    }
  }
}

TEST_CASE("LSA padding, shrinking and window errors") {
  Rng rng(6);
  ParameterStore store;
  LocalSelfAttention lsa(store, "a", 2, 4, rng);
  NoGradGuard guard;
  CHECK(lsa.forward(Var::constant(uniform({1, 2, 6, 10}, rng))).value().shape() == Shape{1, 2, 6, 10});
  CHECK_THROWS_AS(lsa.forward(Var::constant(uniform({1, 2, 3, 8}, rng))), ConfigError);
  LocalSelfAttention shrink(store, "b", 2, 8, rng, true);
  CHECK(shrink.forward(Var::constant(uniform({1, 2, 4, 4}, rng))).value().shape() == Shape{1, 2, 4, 4});
  CHECK_THROWS_AS(parse_attention_kind("se"), ConfigError);
  AttentionConfig bad;
  bad.channel_reduction = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("attention parameter gradients match central differences") {
  for (AttentionKind kind : {AttentionKind::cbam, AttentionKind::cbam_ignore, AttentionKind::lsa}) {
    Rng rng(static_cast<std::uint64_t>(kind) + 10);
    ParameterStore store;
    AttentionConfig cfg;
    cfg.kind = kind;
    cfg.lsa_window = 4;
    cfg.channel_reduction = 2;
    auto gate = make_attention(cfg, store, "gate", 4, rng);
    const Var x = Var::constant(uniform({1, 4, 8, 8}, rng));
    const double err = testing::param_grad_error(store, [&] { return gate->forward(x); }, 3);
    CHECK(err <= 1e-4);
  }
}
