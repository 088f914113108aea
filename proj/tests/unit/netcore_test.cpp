#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "mapid/checkpoint.hpp"
#include "mapid/errors.hpp"
#include "mapid/experiment.hpp"
#include "mapid/netcore.hpp"
#include "mapid/rng.hpp"

using namespace mapid;

namespace {

NetworkConfig single_signomial() {
  NetworkConfig cfg;
  cfg.n = 1;
  cfg.stacks = 1;
  cfg.layers = 1;
  cfg.operators = {};
  cfg.h_lin = 1;
  cfg.h_sig = 1;
  cfg.h_op = 1;
  return cfg;
}

double draw_weight(Rng& rng) {
  const double sign = rng.below(2) ? 1.0 : -1.0;
  return sign * rng.uniform(0.05, 0.3);
}

// Exponents land in [0.1, 0.4] or [1.1, 1.4]: at least 0.1 from every integer
// snap point and from the half-integer rounding boundaries.
double draw_exponent(Rng& rng) {
  return static_cast<double>(rng.below(2)) + rng.uniform(0.1, 0.4);
}

NetworkParams draw_params(const NetworkConfig& cfg, Rng& rng) {
  NetworkParams p = make_params(cfg);
  for (auto& stack : p.stacks) {
    for (auto& layer : stack.layers) {
      for (double& w : layer.w_lin.data) w = draw_weight(rng);
      for (double& e : layer.e_sig.data) e = draw_exponent(rng);
      for (auto& wop : layer.w_op)
        for (double& w : wop.data) w = draw_weight(rng);
    }
    for (double& w : stack.w_out.data) w = draw_weight(rng);
  }
  return p;
}

void scale_weights(NetworkParams& p, double factor) {
  for (auto& stack : p.stacks) {
    for (auto& layer : stack.layers) {
      for (double& w : layer.w_lin.data) w *= factor;
      for (auto& wop : layer.w_op)
        for (double& w : wop.data) w *= factor;
    }
    for (double& w : stack.w_out.data) w *= factor;
  }
}

double penalty_loss(const NetworkConfig& cfg, const NetworkParams& p,
                    const std::vector<StateVec>& xs, const std::vector<StateVec>& ys,
                    const Alphas& a) {
  const Regularizers reg = regularizers(cfg, p);
  return mean_absolute_error(cfg, p, xs, ys) + a.a1 * reg.l_half +
         a.a2 * reg.l_poly + a.a3 * reg.l_ops;
}

}  // namespace

TEST_CASE("init is deterministic and distributed as documented") {
  NetworkConfig cfg = single_signomial();
  cfg.h_lin = 50000;
  cfg.h_sig = 50000;

  NetworkParams a = init_params(cfg, 42);
  NetworkParams b = init_params(cfg, 42);
  CHECK(flatten(a) == flatten(b));
  CHECK(flatten(init_params(cfg, 43)) != flatten(a));

  const Mat& w = a.stacks[0].layers[0].w_lin;
  double mean = 0.0;
  for (double v : w.data) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  CHECK(std::fabs(mean) < 1e-5);
  CHECK(std::sqrt(var) == doctest::Approx(5e-4).epsilon(0.05));

  const Mat& e = a.stacks[0].layers[0].e_sig;
  double emean = 0.0;
  for (double v : e.data) emean += v;
  emean /= static_cast<double>(e.size());
  double evar = 0.0;
  for (double v : e.data) evar += (v - emean) * (v - emean);
  evar /= static_cast<double>(e.size());
  CHECK(emean == doctest::Approx(1.0).epsilon(0.005));
  CHECK(std::sqrt(evar) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("param_count matches the preset architectures") {
  CHECK(param_count(preset("logistic").net) == 11);
  CHECK(param_count(preset("gaussian").net) == 18);
  CHECK(param_count(preset("tinkerbell").net) == 60);
  for (const std::string& name : preset_names()) {
    const NetworkConfig net = preset(name).net;
    CHECK(flatten(init_params(net, 1)).size() == param_count(net));
  }
}

TEST_CASE("zero parameters give a zero network") {
  const NetworkConfig cfg = preset("tinkerbell").net;
  const NetworkParams p = make_params(cfg);
  const StateVec out = forward(cfg, p, {0.3, -0.4});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);

  const ExprSystem sys = extract(cfg, p);
  REQUIRE(sys.size() == 2);
  CHECK(sys[0].is_const(0.0));
  CHECK(sys[1].is_const(0.0));

  const std::vector<StateVec> xs = {{0.1, 0.2}, {0.5, -0.5}, {0.9, 0.0}};
  const std::vector<StateVec> ys = {{0.3, -0.7}, {1.1, 0.2}, {-0.4, 0.6}};
  double expect = 0.0;
  for (const StateVec& y : ys) expect += std::fabs(y[0]) + std::fabs(y[1]);
  expect /= 3.0;
  CHECK(mean_absolute_error(cfg, p, xs, ys) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("hand-built signomial unit computes |x|^2") {
  const NetworkConfig cfg = single_signomial();
  NetworkParams p = make_params(cfg);
  p.stacks[0].layers[0].e_sig.at(0, 0) = 2.0;
  p.stacks[0].w_out.at(0, 1) = 1.0;

  CHECK(forward(cfg, p, {0.5})[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(forward(cfg, p, {-0.8})[0] == doctest::Approx(0.64).epsilon(1e-14));

  const ExprSystem sys = extract(cfg, p);
  REQUIRE(sys.size() == 1);
  CHECK(format(sys[0]) == "|x0|^2");
}

TEST_CASE("forward stays finite on random inits") {
  const NetworkConfig cfg = preset("tinkerbell").net;
  const NetworkParams p = init_params(cfg, 3);
  Rng rng(11);
  std::vector<StateVec> xs;
  for (int i = 0; i < 1000; ++i)
    xs.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
  for (const StateVec& out : forward_batch(cfg, p, xs)) {
    CHECK(std::isfinite(out[0]));
    CHECK(std::isfinite(out[1]));
  }
}

TEST_CASE("regularizer fixtures") {
  NetworkConfig cfg = single_signomial();
  NetworkParams p = make_params(cfg);
  p.stacks[0].layers[0].e_sig.at(0, 0) = 1.0;
  p.stacks[0].layers[0].e_sig.at(0, 1) = 1.0;
  Regularizers reg = regularizers(cfg, p);
  CHECK(reg.l_half == 0.0);
  CHECK(reg.l_poly == 0.0);
  CHECK(reg.l_ops == 0.0);

  p.stacks[0].layers[0].w_lin.at(0, 0) = 0.25;
  reg = regularizers(cfg, p);
  CHECK(reg.l_half == doctest::Approx(0.5).epsilon(1e-15));

  p.stacks[0].layers[0].e_sig.at(0, 0) = 1.8;
  reg = regularizers(cfg, p);
  CHECK(reg.l_poly == doctest::Approx(0.2).epsilon(1e-12));

  cfg.poly_sqrt = true;
  reg = regularizers(cfg, p);
  CHECK(reg.l_poly == doctest::Approx(std::sqrt(0.2)).epsilon(1e-12));
  cfg.poly_sqrt = false;

  NetworkConfig opcfg = single_signomial();
  opcfg.operators = {UnaryOp::Sin};
  NetworkParams q = make_params(opcfg);
  q.stacks[0].layers[0].e_sig.at(0, 0) = 1.0;
  q.stacks[0].layers[0].e_sig.at(0, 1) = 1.0;
  q.stacks[0].layers[0].w_op[0].at(0, 0) = 0.25;
  reg = regularizers(opcfg, q);
  CHECK(reg.l_half == 0.0);
  CHECK(reg.l_ops == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("loss breakdown is consistent with its parts") {
  const NetworkConfig cfg = preset("logistic").net;
  Rng rng(5);
  const NetworkParams p = draw_params(cfg, rng);
  std::vector<StateVec> xs, ys;
  for (int i = 0; i < 25; ++i) {
    xs.push_back({rng.uniform(0.1, 0.9)});
    ys.push_back({rng.uniform(-1.0, 1.0)});
  }

  NetworkParams grad = make_params(cfg);
  Alphas a;
  const LossBreakdown loss = loss_and_gradient(cfg, p, xs, ys, a, grad);
  const Regularizers reg = regularizers(cfg, p);
  CHECK(loss.l_half == reg.l_half);
  CHECK(loss.l_poly == reg.l_poly);
  CHECK(loss.l_ops == reg.l_ops);
  CHECK(loss.mae == doctest::Approx(mean_absolute_error(cfg, p, xs, ys)).epsilon(1e-14));
  CHECK(loss.total ==
        loss.mae + a.a1 * loss.l_half + a.a2 * loss.l_poly + a.a3 * loss.l_ops);

  const Alphas off{0.0, 0.0, 0.0};
  const LossBreakdown plain = loss_and_gradient(cfg, p, xs, ys, off, grad);
  CHECK(plain.total == plain.mae);
}

TEST_CASE("gradient matches central differences") {
  for (const std::string& name : {"logistic", "gaussian", "tinkerbell"}) {
    NetworkConfig cfg = preset(name).net;
    for (const bool sqrt_form : {false, true}) {
      cfg.poly_sqrt = sqrt_form;
      Rng rng(101 + static_cast<std::uint64_t>(sqrt_form));
      for (int draw = 0; draw < 4; ++draw) {
        NetworkParams p = draw_params(cfg, rng);
        std::vector<StateVec> xs;
        for (int i = 0; i < 12; ++i) {
          StateVec x;
          for (int d = 0; d < cfg.n; ++d) x.push_back(rng.uniform(0.5, 1.5));
          xs.push_back(x);
        }
        // Residuals start at least 0.5 from zero so the L1 kink stays away
        // from every finite-difference probe.
        std::vector<StateVec> ys;
        for (const StateVec& out : forward_batch(cfg, p, xs)) {
          StateVec y;
          for (double v : out)
            y.push_back(v + (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.5, 1.0));
          ys.push_back(y);
        }

        Alphas a;
        NetworkParams grad = make_params(cfg);
        loss_and_gradient(cfg, p, xs, ys, a, grad);
        const std::vector<double> an = flatten(grad);

        std::vector<double> flat = flatten(p);
        NetworkParams probe = make_params(cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
          const double h = 1e-6 * std::max(1.0, std::fabs(flat[i]));
          const double keep = flat[i];
          flat[i] = keep + h;
          unflatten(flat, probe);
          const double up = penalty_loss(cfg, probe, xs, ys, a);
          flat[i] = keep - h;
          unflatten(flat, probe);
          const double dn = penalty_loss(cfg, probe, xs, ys, a);
          flat[i] = keep;
          const double fd = (up - dn) / (2.0 * h);
          const double rel =
              std::fabs(fd - an[i]) / std::max(std::fabs(fd) + std::fabs(an[i]), 1e-3);
          worst = std::max(worst, rel);
        }
        CHECK(worst < 1e-5);
      }
    }
  }
}

TEST_CASE("extract agrees with forward") {
  for (const std::string& name : {"logistic", "gaussian", "tinkerbell"}) {
    const NetworkConfig cfg = preset(name).net;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      NetworkParams p = init_params(cfg, seed);
      scale_weights(p, 600.0);
      const ExprSystem sys = extract(cfg, p);
      Rng rng(900 + seed);
      for (int i = 0; i < 20; ++i) {
        StateVec x;
        for (int d = 0; d < cfg.n; ++d) x.push_back(rng.uniform(-1.0, 1.0));
        const StateVec num = forward(cfg, p, x);
        const StateVec sym = evaluate(sys, x);
        for (int d = 0; d < cfg.n; ++d) {
          const std::size_t di = static_cast<std::size_t>(d);
          CHECK(std::fabs(num[di] - sym[di]) <= 1e-9 * (1.0 + std::fabs(num[di])));
        }
      }
    }
  }
}

TEST_CASE("signomial unit order is an internal symmetry") {
  NetworkConfig cfg = single_signomial();
  cfg.h_sig = 2;
  cfg.operators = {UnaryOp::Sin};
  NetworkParams p = init_params(cfg, 9);
  scale_weights(p, 600.0);

  NetworkParams q = p;
  LayerParams& layer = q.stacks[0].layers[0];
  for (int c = 0; c < layer.e_sig.cols; ++c)
    std::swap(layer.e_sig.at(0, c), layer.e_sig.at(1, c));
  for (int r = 0; r < layer.w_op[0].rows; ++r)
    std::swap(layer.w_op[0].at(r, 0), layer.w_op[0].at(r, 1));
  Mat& w_out = q.stacks[0].w_out;
  std::swap(w_out.at(0, cfg.h_lin), w_out.at(0, cfg.h_lin + 1));

  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    const StateVec x = {rng.uniform(-1.0, 1.0)};
    CHECK(forward(cfg, q, x)[0] ==
          doctest::Approx(forward(cfg, p, x)[0]).epsilon(1e-12));
  }
}

TEST_CASE("penalty step shrinks with exact landing") {
  NetworkConfig cfg = single_signomial();
  Alphas a;

  NetworkParams p = make_params(cfg);
  p.stacks[0].layers[0].e_sig.at(0, 0) = 1.0;
  p.stacks[0].layers[0].e_sig.at(0, 1) = 1.0;
  p.stacks[0].layers[0].w_lin.at(0, 0) = 1e-9;
  p.stacks[0].layers[0].w_lin.at(0, 1) = 0.5;
  penalty_step(cfg, p, a, 0.03);
  CHECK(p.stacks[0].layers[0].w_lin.at(0, 0) == 0.0);
  const double expect = 0.5 - 0.03 * a.a1 / (2.0 * std::sqrt(0.5 + 1e-8));
  CHECK(p.stacks[0].layers[0].w_lin.at(0, 1) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(p.stacks[0].layers[0].e_sig.at(0, 0) == 1.0);

  NetworkParams q = make_params(cfg);
  q.stacks[0].layers[0].e_sig.at(0, 0) = 2.1;
  q.stacks[0].layers[0].e_sig.at(0, 1) = 2.4;
  penalty_step(cfg, q, a, 20.0);
  CHECK(q.stacks[0].layers[0].e_sig.at(0, 0) == 2.0);
  CHECK(q.stacks[0].layers[0].e_sig.at(0, 1) == doctest::Approx(2.2).epsilon(1e-12));

  cfg.poly_sqrt = true;
  NetworkParams r = make_params(cfg);
  r.stacks[0].layers[0].e_sig.at(0, 0) = 2.1;
  r.stacks[0].layers[0].e_sig.at(0, 1) = 1.0;
  penalty_step(cfg, r, a, 20.0);
  CHECK(r.stacks[0].layers[0].e_sig.at(0, 0) == 2.0);
  CHECK(r.stacks[0].layers[0].e_sig.at(0, 1) == 1.0);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Checkpoint ckpt;
  ckpt.config = preset("gaussian").net;
  ckpt.seed = 1234567890123456789ULL;
  ckpt.params = init_params(ckpt.config, 17);

  const auto path =
      std::filesystem::temp_directory_path() / "mapid_netcore_ckpt_test.json";
  save_checkpoint(path.string(), ckpt);
  const Checkpoint back = load_checkpoint(path.string());
  std::filesystem::remove(path);

  CHECK(back.format_version == ckpt.format_version);
  CHECK(back.seed == ckpt.seed);
  CHECK(back.config.n == ckpt.config.n);
  CHECK(back.config.stacks == ckpt.config.stacks);
  CHECK(back.config.operators == ckpt.config.operators);
  CHECK(back.config.poly_sqrt == ckpt.config.poly_sqrt);
  CHECK(flatten(back.params) == flatten(ckpt.params));
}

TEST_CASE("non-finite activations raise NumericOverflow") {
  const NetworkConfig cfg = single_signomial();
  NetworkParams p = make_params(cfg);
  p.stacks[0].layers[0].e_sig.at(0, 1) = 1100.0;
  p.stacks[0].w_out.at(0, 1) = 1.0;
  bool caught = false;
  try {
    forward(cfg, p, {0.5});
  } catch (const NumericOverflow& e) {
    caught = true;
    CHECK(e.stack() == 0);
    CHECK(e.layer() == 0);
  }
  CHECK(caught);
}
