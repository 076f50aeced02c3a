#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/nn/adam.hpp"
#include "sarfuse/nn/gradcheck.hpp"
#include "sarfuse/nn/layers.hpp"
#include "sarfuse/nn/loss.hpp"
#include "sarfuse/nn/lstm.hpp"
#include "sarfuse/nn/serialize.hpp"
#include "sarfuse/sfmodel.hpp"

using namespace sarfuse;
using namespace sarfuse::nn;
using doctest::Approx;

using namespace testing;

TEST_SUITE("neural") {
  TEST_CASE("conv1d examples") {
    ParamStore s;
    const Conv1d c = Conv1d::create(s, "c", 1, 1, 3);
    Matrix x(3, 1);
    x << 1, 2, 3;
    Matrix y;
    s.values()[0] = s.values()[1] = s.values()[2] = 1.0;
    c.forward(s, x, 3, 1, y);
    CHECK(y(0, 0) == Approx(3));
    CHECK(y(1, 0) == Approx(6));
    CHECK(y(2, 0) == Approx(5));

    s.values()[0] = 0, s.values()[1] = 1, s.values()[2] = 0;
    c.forward(s, x, 3, 1, y);
    CHECK(y.isApprox(x));

    std::fill(s.values().begin(), s.values().end(), 0.0);
    s.values()[3] = 0.25;
    c.forward(s, x, 3, 1, y);
    for (int i = 0; i < 3; ++i) CHECK(y(i, 0) == Approx(0.25));
    CHECK_THROWS_AS(Conv1d::create(s, "even", 1, 1, 2), ValidationError);
  }

  TEST_CASE("conv1d keeps batch members apart") {
    Rng rng(3);
    ParamStore s;
    const Conv1d c = Conv1d::create(s, "c", 2, 3, 3);
    randomize(s, rng);
    const int T = 6, B = 3;
    const Matrix x = random_matrix(T * B, 2, rng);
    Matrix y;
    c.forward(s, x, T, B, y);
    for (int b = 0; b < B; ++b) {
      Matrix xb(T, 2), yb;
      for (int t = 0; t < T; ++t) xb.row(t) = x.row(t * B + b);
      c.forward(s, xb, T, 1, yb);
      for (int t = 0; t < T; ++t) CHECK((yb.row(t) - y.row(t * B + b)).norm() < 1e-12);
    }
  }

  TEST_CASE("maxpool examples") {
    Matrix x(4, 1), y;
    std::vector<int> argmax;
    x << 1, 5, 1, 1;
    maxpool1d_forward(x, 4, 1, 3, y, argmax);
    CHECK(y(0, 0) == 5);
    CHECK(y(1, 0) == 5);
    CHECK(y(2, 0) == 5);
    CHECK(y(3, 0) == 1);
    maxpool1d_forward(x, 4, 1, 1, y, argmax);
    CHECK(y == x);
    Matrix flat = Matrix::Constant(5, 2, 0.3);
    maxpool1d_forward(flat, 5, 1, 3, y, argmax);
    CHECK(y == flat);
  }

  TEST_CASE("lstm cell limits") {
    ParamStore s;
    const LstmCell cell = LstmCell::create(s, "l", 2, 3);
    std::fill(s.values().begin(), s.values().end(), 0.0);
    Rng rng(1);
    const Matrix x = random_matrix(4, 2, rng);
    const Matrix zero = Matrix::Zero(4, 3);
    auto st = lstm_step(s, cell, x, zero, zero);
    CHECK(st.h.norm() == 0.0);

    auto bias = s.matrix(cell.bias);
    for (int j = 0; j < 3; ++j) {
      bias(3 + j, 0) = 40.0;  // input gate
      bias(6 + j, 0) = 40.0;  // candidate
      bias(9 + j, 0) = 40.0;  // output gate
    }
    st = lstm_step(s, cell, Matrix::Zero(4, 2), zero, zero);
    for (Eigen::Index i = 0; i < st.h.size(); ++i) CHECK(st.h.data()[i] == Approx(std::tanh(1.0)).epsilon(1e-9));
    CHECK(std::tanh(1.0) == Approx(0.7616).epsilon(1e-4));
  }

  TEST_CASE("lstm init uses forget bias one") {
    ParamStore s;
    const LstmCell cell = LstmCell::create(s, "l", 2, 3);
    Rng rng(2);
    cell.init(s, rng);
    const auto b = s.matrix(cell.bias);
    for (int j = 0; j < 3; ++j) CHECK(b(j, 0) == 1.0);
    for (int j = 3; j < 12; ++j) CHECK(b(j, 0) == 0.0);
  }

  TEST_CASE("bilstm symmetry") {
    Rng rng(11);
    ParamStore s;
    const BiLstm layer = BiLstm::create(s, "b", 2, 3);
    randomize(s, rng);
    // Same weights in both directions so reversal maps one half onto the other.
    const auto& fw = s.info(layer.forward_cell.weight);
    const auto& bw = s.info(layer.backward_cell.weight);
    std::copy_n(s.values().begin() + fw.offset, fw.size, s.values().begin() + bw.offset);
    const auto& fb = s.info(layer.forward_cell.bias);
    const auto& bb = s.info(layer.backward_cell.bias);
    std::copy_n(s.values().begin() + fb.offset, fb.size, s.values().begin() + bb.offset);

    const int T = 5, B = 2;
    const Matrix x = random_matrix(T * B, 2, rng);
    Matrix xr(T * B, 2);
    for (int t = 0; t < T; ++t) xr.middleRows((T - 1 - t) * B, B) = x.middleRows(t * B, B);
    BiLstmCache a, r;
    bilstm_forward(s, layer, x, T, B, a);
    bilstm_forward(s, layer, xr, T, B, r);
    for (int t = 0; t < T; ++t) {
      const auto at = a.output.middleRows(t * B, B);
      const auto rt = r.output.middleRows((T - 1 - t) * B, B);
      CHECK((at.leftCols(3) - rt.rightCols(3)).norm() < 1e-12);
      CHECK((at.rightCols(3) - rt.leftCols(3)).norm() < 1e-12);
    }

    BiLstmCache one;
    const Matrix x1 = random_matrix(B, 2, rng);
    bilstm_forward(s, layer, x1, 1, B, one);
    CHECK((one.output.leftCols(3) - one.output.rightCols(3)).norm() < 1e-12);
  }

  TEST_CASE("weighted losses") {
    const std::vector<double> p{0.1, 0.5}, y{0.3, 0.2}, w1{1, 1};
    CHECK(weighted_mse(p, y, w1) == Approx((0.04 + 0.09) / 2));
    CHECK(weighted_mse(std::vector<double>{0.1, 99}, std::vector<double>{0, 0}, std::vector<double>{1, 0}) ==
          Approx(0.01));
    CHECK(weighted_mse(p, p, w1) == 0.0);
    CHECK_THROWS_AS(weighted_mse(p, y, std::vector<double>{0, 0}), ValidationError);

    std::vector<double> g(1);
    const double l = weighted_bce_logits(std::vector<double>{0.0}, std::vector<double>{1.0},
                                         std::vector<double>{2.0}, 4.0, g);
    CHECK(l == Approx(2.0 * std::log(2.0)));
    CHECK(g[0] == Approx(2.0 * (0.5 - 1.0) / 4.0));
    const double big = weighted_bce_logits(std::vector<double>{800.0}, std::vector<double>{0.0},
                                           std::vector<double>{1.0}, 1.0, {});
    CHECK(big == Approx(800.0));
  }

  TEST_CASE("adam") {
    std::vector<double> p{0.0}, g{1.0};
    AdamState st(1, 0.005);
    adam_step(st, p, g);
    CHECK(p[0] == Approx(-0.005).epsilon(1e-6));

    std::vector<double> q{0.3, -0.2}, zero{0.0, 0.0};
    AdamState s2(2);
    adam_step(s2, q, zero);
    CHECK(q == std::vector<double>{0.3, -0.2});

    std::vector<double> a{1.0, 2.0}, b{1.0, 2.0};
    AdamState sa(2), sb(2);
    for (int i = 0; i < 10; ++i) {
      const std::vector<double> ga{a[0] - 0.5, 3 * a[1]}, gb{b[0] - 0.5, 3 * b[1]};
      adam_step(sa, a, ga);
      adam_step(sb, b, gb);
    }
    CHECK(a == b);
    CHECK_THROWS_AS(adam_step(sa, a, std::vector<double>{1.0}), ValidationError);
  }

  TEST_CASE("gradient checker controls") {
    Rng rng(5);
    Harness h = dense_harness(3, 2, 4, rng);
    const Matrix x = random_matrix(4, 3, rng);
    const auto clean = check_harness(h, x);
    CHECK(clean.max_relative_error < 1e-6);

    auto run = h.run;
    h.run = [run](const ParamStore& s, const Matrix& xi, std::vector<double>* grad) {
      auto p = run(s, xi, grad);
      if (grad) (*grad)[1] *= 1.01;
      return p;
    };
    const auto broken = check_harness(h, x);
    CHECK(broken.max_relative_error > kGradTolerance);
    CHECK(broken.worst_coordinate == 1);
  }

  TEST_CASE("gradient checks over seeded configurations") {
    const auto start = std::chrono::steady_clock::now();
    const auto cases = run_gradient_suite();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    double worst = 0.0;
    for (const auto& c : cases) {
      INFO(c.name);
      CHECK(c.report.checked > 0);
      CHECK(c.report.max_relative_error < kGradTolerance);
      if (c.name == "conv-pool-relu-dense") CHECK(c.report.skipped_kinks < c.report.coordinates.size() / 10 + 1);
      worst = std::max(worst, c.report.max_relative_error);
    }
    MESSAGE("gradient configurations: " << cases.size() << ", worst relative error " << worst << ", " << seconds
                                        << " s");
    CHECK(cases.size() >= 20);
    CHECK(seconds < 120.0);
  }

  TEST_CASE("parameter file round trip") {
    ParamStore s;
    s.add("a", {2, 3});
    s.add("b", {4});
    Rng rng(9);
    randomize(s, rng);
    s.round_to_float();
    std::stringstream buf;
    write_params(buf, s, R"({"k":1})");
    const auto f = read_params(buf);
    CHECK(f.metadata == R"({"k":1})");
    CHECK(f.params == s);
    CHECK(f.params.entries()[0].shape == std::vector<int>{2, 3});

    std::stringstream bad("SARFUSE-PARAMS 2\n");
    CHECK_THROWS_AS(read_params(bad), ValidationError);
    const std::string text = buf.str();
    std::stringstream truncated(text.substr(0, text.size() - 3));
    CHECK_THROWS(read_params(truncated));
  }
}
