#include "gradient_suite.hpp"

#include <cmath>
#include <tuple>

#include "sarfuse/nn/layers.hpp"
#include "sarfuse/nn/loss.hpp"
#include "sarfuse/nn/lstm.hpp"
#include "sarfuse/sfmodel.hpp"

namespace testing {

using namespace sarfuse;
using namespace sarfuse::nn;

namespace {

// L = sum r*y + 0.5 sum y^2, so dL/dy = r + y.
double probe_loss(const Matrix& y, const Matrix& r, Matrix* dy) {
  if (dy != nullptr) *dy = r + y;
  return (r.array() * y.array()).sum() + 0.5 * y.squaredNorm();
}

std::uint64_t pattern_of(const std::vector<int>& argmax, const Matrix& pre_relu) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int a : argmax) h = fingerprint_mix(h, static_cast<std::uint64_t>(a));
  for (Eigen::Index i = 0; i < pre_relu.size(); ++i) h = fingerprint_mix(h, pre_relu.data()[i] > 0.0);
  return h;
}

}  // namespace

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  std::normal_distribution<double> z(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

void randomize(ParamStore& store, Rng& rng, double scale) {
  std::normal_distribution<double> z(0.0, scale);
  for (double& v : store.values()) v = z(rng);
}

std::vector<double> Harness::pack(const Matrix& x) const {
  std::vector<double> theta(store.values().begin(), store.values().end());
  theta.insert(theta.end(), x.data(), x.data() + x.size());
  return theta;
}

GradCheckReport check_harness(Harness& h, const Matrix& x) {
  const auto theta = h.pack(x);
  const std::size_t P = h.store.size();
  auto evaluate = [&](std::span<const double> th, std::vector<double>* grad) {
    ParamStore s = h.store;
    std::copy(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(P), s.values().begin());
    Matrix xi = Eigen::Map<const Matrix>(th.data() + P, h.in_rows, h.in_cols);
    return h.run(s, xi, grad);
  };
  std::vector<double> analytic;
  evaluate(theta, &analytic);
  return grad_check([&](std::span<const double> th) { return evaluate(th, nullptr); }, theta, analytic, {}, kGradStep);
}


Harness dense_harness(int in, int out, int rows, Rng& rng) {
  Harness h;
  const Dense d = Dense::create(h.store, "d", in, out);
  randomize(h.store, rng);
  h.in_rows = rows, h.in_cols = in;
  const Matrix r = random_matrix(rows, out, rng);
  h.run = [d, r, in](const ParamStore& s, const Matrix& x, std::vector<double>* grad) {
    Matrix y, dy, dx;
    d.forward(s, x, y);
    const double loss = probe_loss(y, r, grad ? &dy : nullptr);
    if (grad) {
      grad->assign(s.size() + x.size(), 0.0);
      d.backward(s, x, dy, &dx, std::span<double>(grad->data(), s.size()));
      std::copy(dx.data(), dx.data() + dx.size(), grad->begin() + static_cast<std::ptrdiff_t>(s.size()));
    }
    (void)in;
    return Probe{loss, 0};
  };
  return h;
}

namespace {

Harness conv_harness(int in, int out, int kernel, int steps, int batch, Rng& rng) {
  Harness h;
  const Conv1d c = Conv1d::create(h.store, "c", in, out, kernel);
  randomize(h.store, rng);
  h.in_rows = steps * batch, h.in_cols = in;
  const Matrix r = random_matrix(steps * batch, out, rng);
  h.run = [c, r, steps, batch](const ParamStore& s, const Matrix& x, std::vector<double>* grad) {
    Matrix y, dy, dx;
    c.forward(s, x, steps, batch, y);
    const double loss = probe_loss(y, r, grad ? &dy : nullptr);
    if (grad) {
      grad->assign(s.size() + x.size(), 0.0);
      c.backward(s, x, steps, batch, dy, &dx, std::span<double>(grad->data(), s.size()));
      std::copy(dx.data(), dx.data() + dx.size(), grad->begin() + static_cast<std::ptrdiff_t>(s.size()));
    }
    return Probe{loss, 0};
  };
  return h;
}

// conv -> maxpool -> relu -> dense, the SF branch skeleton.
Harness branch_harness(int steps, int batch, int pool, Rng& rng) {
  Harness h;
  const Conv1d c = Conv1d::create(h.store, "c", 2, 4, 3);
  const Dense d = Dense::create(h.store, "d", 4, 3);
  randomize(h.store, rng);
  h.in_rows = steps * batch, h.in_cols = 2;
  const Matrix r = random_matrix(steps * batch, 3, rng);
  h.run = [=](const ParamStore& s, const Matrix& x, std::vector<double>* grad) {
    Matrix conv, pooled, act, y;
    std::vector<int> argmax;
    c.forward(s, x, steps, batch, conv);
    maxpool1d_forward(conv, steps, batch, pool, pooled, argmax);
    relu_forward(pooled, act);
    d.forward(s, act, y);
    Matrix dy;
    const double loss = probe_loss(y, r, grad ? &dy : nullptr);
    if (grad) {
      grad->assign(s.size() + x.size(), 0.0);
      std::span<double> g(grad->data(), s.size());
      Matrix d_act, d_pooled, d_conv, dx;
      d.backward(s, act, dy, &d_act, g);
      relu_backward(pooled, d_act, d_pooled);
      maxpool1d_backward(d_pooled, steps, batch, argmax, d_conv);
      c.backward(s, x, steps, batch, d_conv, &dx, g);
      std::copy(dx.data(), dx.data() + dx.size(), grad->begin() + static_cast<std::ptrdiff_t>(s.size()));
    }
    return Probe{loss, pattern_of(argmax, pooled)};
  };
  return h;
}

Harness lstm_harness(int input, int hidden, int steps, int batch, bool reverse, Rng& rng) {
  Harness h;
  const LstmCell cell = LstmCell::create(h.store, "l", input, hidden);
  randomize(h.store, rng);
  h.in_rows = steps * batch, h.in_cols = input;
  const Matrix r = random_matrix(steps * batch, hidden, rng);
  h.run = [=](const ParamStore& s, const Matrix& x, std::vector<double>* grad) {
    LstmCache cache;
    lstm_forward(s, cell, x, steps, batch, reverse, cache);
    Matrix dy, dx;
    const double loss = probe_loss(cache.hidden, r, grad ? &dy : nullptr);
    if (grad) {
      grad->assign(s.size() + x.size(), 0.0);
      lstm_backward(s, cell, x, steps, batch, reverse, cache, dy, &dx, std::span<double>(grad->data(), s.size()));
      std::copy(dx.data(), dx.data() + dx.size(), grad->begin() + static_cast<std::ptrdiff_t>(s.size()));
    }
    return Probe{loss, 0};
  };
  return h;
}

Harness bilstm_harness(int input, int hidden, int steps, int batch, Rng& rng) {
  Harness h;
  const BiLstm layer = BiLstm::create(h.store, "b", input, hidden);
  randomize(h.store, rng);
  h.in_rows = steps * batch, h.in_cols = input;
  const Matrix r = random_matrix(steps * batch, 2 * hidden, rng);
  h.run = [=](const ParamStore& s, const Matrix& x, std::vector<double>* grad) {
    BiLstmCache cache;
    bilstm_forward(s, layer, x, steps, batch, cache);
    Matrix dy, dx;
    const double loss = probe_loss(cache.output, r, grad ? &dy : nullptr);
    if (grad) {
      grad->assign(s.size() + x.size(), 0.0);
      bilstm_backward(s, layer, x, steps, batch, cache, dy, &dx, std::span<double>(grad->data(), s.size()));
      std::copy(dx.data(), dx.data() + dx.size(), grad->begin() + static_cast<std::ptrdiff_t>(s.size()));
    }
    return Probe{loss, 0};
  };
  return h;
}

sf::TrainingSample random_sample(const sf::SfArchitecture& arch, Rng& rng, int masked_every) {
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::normal_distribution<double> z(0.0, 1.0);
  sf::TrainingSample s;
  const int T = arch.steps;
  for (int t = 0; t < T; ++t) {
    const bool hidden = masked_every > 0 && t % masked_every == 1;
    s.input.ndvi.push_back(hidden ? sf::kMaskedNdviSentinel : u(rng));
    s.input.presence.push_back(hidden ? 0.0 : 1.0);
    for (std::size_t c = 0; c < arch.sar_channels.size(); ++c) s.input.sar.push_back(z(rng));
    s.target.push_back(arch.head == sf::Head::Regression ? u(rng) : (t % 5 == 2 ? 1.0 : 0.0));
    s.weight.push_back(hidden ? 0.75 : 0.25);
  }
  return s;
}

// Full network: analytic gradient from the production loss path; the probe
// re-runs the forward pass and reports the ReLU/pool regime.
GradCheckReport check_network(const sf::SfArchitecture& arch, int batch, std::uint64_t seed, std::size_t max_coords) {
  sf::SfModel model(arch, seed);
  Rng rng(seed + 1);
  std::normal_distribution<double> z(0.0, 0.05);
  for (double& v : model.params().values()) v += z(rng);  // leave the exact init point
  std::vector<sf::TrainingSample> samples;
  for (int b = 0; b < batch; ++b) samples.push_back(random_sample(arch, rng, 3));
  std::vector<const sf::TrainingSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);

  std::vector<double> analytic(model.params().size());
  sf::loss_and_gradient(model, ptrs, analytic, sf::Execution::Serial, 2);

  std::vector<const sf::EncodedSample*> inputs;
  for (const auto& s : samples) inputs.push_back(&s.input);
  const sf::EncodedBatch enc = sf::make_batch(inputs, arch);
  double wsum = 0;
  for (const auto& s : samples)
    for (double w : s.weight) wsum += w;

  sf::SfModel probe_model = model;
  auto objective = [&](std::span<const double> th) {
    std::copy(th.begin(), th.end(), probe_model.params().values().begin());
    sf::SfNetwork::Cache cache;
    probe_model.network().forward(probe_model.params(), enc, cache);
    std::vector<double> out, target, weight;
    for (int t = 0; t < enc.steps; ++t) {
      for (int b = 0; b < enc.batch; ++b) {
        out.push_back(cache.output(t * enc.batch + b, 0));
        target.push_back(samples[b].target[t]);
        weight.push_back(samples[b].weight[t]);
      }
    }
    const double sum = arch.head == sf::Head::Regression ? weighted_squared_error(out, target, weight, 1.0, {})
                                                         : weighted_bce_logits(out, target, weight, 1.0, {});
    return Probe{sum / wsum, probe_model.network().activation_pattern(cache)};
  };

  std::vector<std::size_t> coords;
  const std::size_t P = model.params().size();
  if (P <= max_coords) {
    for (std::size_t i = 0; i < P; ++i) coords.push_back(i);
  } else {
    // Every tensor gets coordinates, spread evenly within it.
    const auto& entries = model.params().entries();
    const std::size_t per = std::max<std::size_t>(4, max_coords / entries.size());
    for (const auto& e : entries) {
      for (std::size_t k = 0; k < std::min(per, e.size); ++k) coords.push_back(e.offset + k * e.size / std::min(per, e.size));
    }
  }
  std::vector<double> theta(model.params().values().begin(), model.params().values().end());
  return grad_check(objective, theta, analytic, coords, kGradStep);
}

sf::SfArchitecture small_arch(bool ndvi, std::vector<Channel> sar, sf::Head head, int steps) {
  sf::SfArchitecture a;
  a.use_ndvi = ndvi;
  a.sar_channels = std::move(sar);
  a.conv_filters = {3, 4};
  a.branch_dense = {5, 3};
  a.lstm_hidden = 3;
  a.head = head;
  a.steps = steps;
  return a;
}

}  // namespace

std::vector<GradientCase> run_gradient_suite() {
  std::vector<GradientCase> cases;
  auto add = [&](std::string name, GradCheckReport r) { cases.push_back({std::move(name), std::move(r)}); };
  Rng rng(20240611);

  for (auto [in, out, rows] : {std::tuple{3, 2, 4}, {5, 4, 7}, {1, 6, 3}, {8, 3, 10}}) {
    Harness h = dense_harness(in, out, rows, rng);
    add("dense", check_harness(h, random_matrix(rows, in, rng)));
  }
  for (auto [in, out, k, T, B] : {std::tuple{1, 3, 3, 6, 2}, {2, 4, 3, 5, 3}, {3, 2, 5, 7, 1}, {2, 2, 1, 4, 2}}) {
    Harness h = conv_harness(in, out, k, T, B, rng);
    add("conv1d", check_harness(h, random_matrix(T * B, in, rng)));
  }
  for (auto [T, B, pool] : {std::tuple{6, 2, 3}, {7, 1, 3}, {5, 3, 2}}) {
    Harness h = branch_harness(T, B, pool, rng);
    add("conv-pool-relu-dense", check_harness(h, random_matrix(T * B, 2, rng)));
  }
  for (auto [in, hid, T, B, rev] :
       {std::tuple{2, 3, 4, 2, false}, {2, 3, 4, 2, true}, {4, 2, 6, 1, false}, {1, 4, 3, 3, true}}) {
    Harness h = lstm_harness(in, hid, T, B, rev, rng);
    add("lstm", check_harness(h, random_matrix(T * B, in, rng, 0.8)));
  }
  for (auto [in, hid, T, B] : {std::tuple{2, 3, 4, 2}, {3, 2, 1, 2}, {5, 4, 5, 1}}) {
    Harness h = bilstm_harness(in, hid, T, B, rng);
    add("bilstm", check_harness(h, random_matrix(T * B, in, rng, 0.8)));
  }

  using C = Channel;
  add("network", check_network(small_arch(true, {C::CohVv, C::Sigma0VhDb}, sf::Head::Regression, 7), 2, 1, 100000));
  add("network", check_network(small_arch(true, {C::Rvi}, sf::Head::Detection, 6), 2, 2, 100000));
  add("network",
      check_network(small_arch(false, {C::CohVh, C::MixedCoherence}, sf::Head::Regression, 5), 3, 3, 100000));
  add("network", check_network(small_arch(true, {}, sf::Head::Detection, 8), 2, 4, 100000));
  // Default layer sizes, all eight SAR branches, batch of four.
  add("network", check_network(sf::SfArchitecture{}, 4, 5, 3000));
  return cases;
}

}  // namespace testing
