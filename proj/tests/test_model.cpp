#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "spg/model.hpp"

using namespace spg;

namespace {

size_t conv_params(size_t in, size_t out, size_t k) { return out * in * k * k + out; }
// 3x3 conv without bias followed by batch-norm scale and shift.
size_t bn_conv_params(size_t in, size_t out) { return out * in * 9 + 2 * out; }

Tensor<float> random_images(int n, int h, int w, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor<float> t(3, n, h, w);
  for (auto& v : t.data) v = u(gen);
  return t;
}

NetworkConfig small_config() {
  NetworkConfig c;
  c.input_height = c.input_width = 16;
  c.num_classes = 3;
  c.stem = {{4, true}};
  c.a1 = {6, false};
  c.a2 = {8, true};
  c.a3 = {8, false};
  c.b_adapter_filters = 5;
  c.b_shared_filters = 5;
  c.c_head_filters = 4;
  c.batch_norm = true;
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("default parameter count equals the closed-form layer sum") {
  const NetworkConfig c;
  const size_t expected = conv_params(3, 16, 3) + conv_params(16, 32, 3)  // stem
                          + conv_params(32, 64, 3)                        // A1
                          + conv_params(64, 128, 3)                       // A2
                          + conv_params(128, 256, 3)                      // A3
                          + conv_params(256, 4, 1)                        // A4
                          + conv_params(64, 128, 3)                       // B1 adapter
                          + conv_params(128, 128, 3)                      // B2 adapter
                          + conv_params(128, 128, 3)                      // shared mid
                          + conv_params(128, 1, 1)                        // shared out
                          + conv_params(256, 128, 3) + conv_params(128, 1, 1);  // SPG-C
  CHECK(Network<float>(c).parameter_count() == expected);

  NetworkConfig unshared = c;
  unshared.share_b_layers = false;
  CHECK(Network<float>(unshared).parameter_count() ==
        expected + conv_params(128, 128, 3) + conv_params(128, 1, 1));

  NetworkConfig no_c = c;
  no_c.enable_c_head = false;
  CHECK(Network<float>(no_c).parameter_count() ==
        expected - conv_params(256, 128, 3) - conv_params(128, 1, 1));

  // BN drops the trunk conv biases and adds gamma and beta; running stats are buffers.
  NetworkConfig bn = c;
  bn.batch_norm = true;
  CHECK(Network<float>(bn).parameter_count() ==
        expected + bn_conv_params(3, 16) + bn_conv_params(16, 32) + bn_conv_params(32, 64) +
            bn_conv_params(64, 128) + bn_conv_params(128, 256) - conv_params(3, 16, 3) -
            conv_params(16, 32, 3) - conv_params(32, 64, 3) - conv_params(64, 128, 3) - conv_params(128, 256, 3));
}

TEST_CASE("shared B layers are one tensor seen by both branches") {
  Network<float> net(small_config());
  for (const char* layer : {"mid", "out"})
    for (const char* part : {"weight", "bias"}) {
      const std::string b1 = std::string("b1.") + layer + "." + part;
      const std::string b2 = std::string("b2.") + layer + "." + part;
      REQUIRE(net.param_index(b1) == net.param_index(b2));
      net.param_values(net.param_index(b1))[0] = 42.0f;
      CHECK(net.param_values(net.param_index(b2))[0] == 42.0f);
    }
  CHECK(net.param_index("b1.adapter.weight") != net.param_index("b2.adapter.weight"));

  NetworkConfig c = small_config();
  c.share_b_layers = false;
  Network<float> unshared(c);
  CHECK(unshared.param_index("b1.mid.weight") != unshared.param_index("b2.mid.weight"));
}

TEST_CASE("plain network has no B or C parameters") {
  NetworkConfig c = small_config();
  c.enable_spg = false;
  Network<float> net(c);
  for (size_t i = 0; i < net.num_param_tensors(); ++i) {
    const std::string& n = net.param_name(i);
    CHECK(n.rfind("b", 0) != 0);
    CHECK(n.rfind("c.", 0) != 0);
  }
  const auto o = net.forward(random_images(2, 16, 16, 1));
  CHECK(o.f_b1.data.empty());
  CHECK(o.f_b2.data.empty());
  CHECK(o.f_c.data.empty());
}

TEST_CASE("plain and SPG networks share the trunk initialisation") {
  NetworkConfig c = small_config();
  Network<float> spg(c);
  c.enable_spg = false;
  Network<float> plain(c);
  for (size_t i = 0; i < plain.num_param_tensors(); ++i)
    CHECK(plain.param_values(i) == spg.param_values(spg.param_index(plain.param_name(i))));
}

TEST_CASE("parameter groups") {
  Network<float> net(small_config());
  for (size_t i = 0; i < net.num_param_tensors(); ++i) {
    const std::string& n = net.param_name(i);
    const bool added = n.rfind("a4.", 0) == 0 || n.rfind("b", 0) == 0 || n.rfind("c.", 0) == 0;
    const bool buffer = n.find(".running_") != std::string::npos;
    CHECK(net.param_group(i) == (buffer ? ParamGroup::kBuffer : added ? ParamGroup::kAdded : ParamGroup::kBase));
  }
}

TEST_CASE("output shapes follow the tap sizes") {
  const NetworkConfig c = small_config();
  const TapSizes t = tap_sizes(c);
  const auto o = Network<float>(c).forward(random_images(3, 16, 16, 2));
  CHECK(o.f_a4.channels == 3);
  CHECK(o.f_a4.height == t.a3.height);
  CHECK(o.f_b1.height == t.a1.height);
  CHECK(o.f_b2.height == t.a2.height);
  CHECK(o.f_c.height == t.a3.height);
  for (float v : o.f_b1.data) CHECK((v > 0.0f && v < 1.0f));
}

TEST_CASE("zero image through zeroed A4 gives uniform probabilities") {
  Network<float> net(small_config());
  for (const char* p : {"a4.weight", "a4.bias"}) {
    auto& v = net.param_values(net.param_index(p));
    std::fill(v.begin(), v.end(), 0.0f);
  }
  const auto o = net.forward(Tensor<float>(3, 2, 16, 16, 0.0f));
  for (float p : o.class_probs) CHECK(p == doctest::Approx(1.0 / 3));
}

TEST_CASE("logits are the spatial mean of F_A4 and batch rows are independent") {
  Network<float> net(small_config());
  Tensor<float> imgs = random_images(3, 16, 16, 5);
  // Image 2 duplicates image 0.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) imgs.at(c, 2, y, x) = imgs.at(c, 0, y, x);
  const auto o = net.forward(imgs);
  for (int n = 0; n < 3; ++n)
    for (int k = 0; k < 3; ++k) {
      double sum = 0;
      for (int y = 0; y < o.f_a4.height; ++y)
        for (int x = 0; x < o.f_a4.width; ++x) sum += o.f_a4.at(k, n, y, x);
      CHECK(o.logit(n, k) == doctest::Approx(sum / o.f_a4.plane()).epsilon(1e-5));
    }
  for (int k = 0; k < 3; ++k) CHECK(o.logit(0, k) == o.logit(2, k));
}

TEST_CASE("extract_attention: constant, min-max and affine invariance") {
  Tensor<float> f(2, 1, 2, 2);
  f.data = {5, 5, 5, 5, 1, 3, 2, 1};
  CHECK(extract_attention(f, 0, 0).scores == std::vector<float>(4, 0.0f));
  CHECK(extract_attention(f, 0, 1).scores == std::vector<float>{0, 1, 0.5f, 0});
  Tensor<float> g = f;
  for (int i = 4; i < 8; ++i) g.data[i] = 2.0f * f.data[i] + 3.0f;
  CHECK(extract_attention(g, 0, 1).scores == extract_attention(f, 0, 1).scores);
}

TEST_CASE("predict_topk examples and sort oracle") {
  const std::vector<float> a{0.1f, 0.9f, 0.5f};
  CHECK(predict_topk(a, 2) == std::vector<int>{1, 2});
  const std::vector<float> eq{1, 1, 1};
  CHECK(predict_topk(eq, 3) == std::vector<int>{0, 1, 2});
  std::mt19937 gen(9);
  std::uniform_int_distribution<int> u(0, 5);  // few distinct values -> many ties
  for (int t = 0; t < 200; ++t) {
    std::vector<float> s(7);
    for (auto& v : s) v = static_cast<float>(u(gen));
    std::vector<int> order(7);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return s[x] > s[y] || (s[x] == s[y] && x < y); });
    order.resize(4);
    CHECK(predict_topk(s, 4) == order);
  }
}

TEST_CASE("parameter import validates names and shapes") {
  const NetworkConfig c = small_config();
  Network<float> net(c);
  auto params = net.export_parameters();
  Network<float> copy(c, params);
  for (size_t i = 0; i < net.num_param_tensors(); ++i) CHECK(copy.param_values(i) == net.param_values(i));
  params[0].shape[0] += 1;
  CHECK_THROWS_AS(Network<float>(c, params), Error);
}

TEST_CASE("batch norm: inference with batch statistics reproduces training mode") {
  Network<double> net([] {
    NetworkConfig c = small_config();
    c.init_seed = 4;
    return c;
  }());
  Tensor<double> imgs(3, 4, 16, 16);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : imgs.data) v = u(gen);
  ForwardState<double> state;
  const auto train = net.forward(imgs, state);
  const auto before = net.forward(imgs);
  CHECK(before.logits != train.logits);  // running stats still at their initial values

  // Momentum 1 copies the batch statistics, with the unbiased variance.
  net.update_running_stats(state, 1.0);
  const TapSizes t = tap_sizes(net.config());
  const std::vector<std::pair<std::string, SpatialSize>> taps{
      {"stem.0", t.stem}, {"a1", t.a1}, {"a2", t.a2}, {"a3", t.a3}};
  for (const auto& [name, size] : taps) {
    // Pre-pooling size is the tap size before the block's own downsampling.
    const bool pooled = name == "stem.0" || name == "a2";
    const double m = 4.0 * size.height * size.width * (pooled ? 4 : 1);
    for (double& v : net.param_values(net.param_index(name + ".bn.running_var"))) v *= (m - 1) / m;
  }
  const auto after = net.forward(imgs);
  for (size_t i = 0; i < train.logits.size(); ++i) CHECK(after.logits[i] == doctest::Approx(train.logits[i]).epsilon(1e-9));
}

TEST_CASE("config validation rejects collapsed maps") {
  NetworkConfig c = small_config();
  c.input_height = c.input_width = 4;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.num_classes = 1;
  CHECK_THROWS_AS(c.validate(), Error);
}

}  // TEST_SUITE
